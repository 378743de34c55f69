"""Mutant kill definitions.

KD1  statistical killing: t-test plus Cohen's d on per-instance accuracies.
KD2  standard killing: some input the original gets right and the mutant wrong.
KD3  class-level killing: KD2 restricted to inputs whose true class the original predicts.
KD4  input-level killing: some input where the two models disagree.
KDF  Fisher killing: per-input Fisher's exact test on instance correctness
     counts; killed when at least ``tau`` inputs are killing inputs.

KD2, KD3 and KD4 compare one original instance against one mutant instance.
KD1 and KDF use every instance of both models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .matrixio import CorrectnessMatrix, DataFormatError, GroundTruth, accuracy_sample
from .stats import TTEST_VARIANTS, ContingencyTable, fisher_exact, two_sample_ttest

DEFINITIONS = ("KD1", "KD2", "KD3", "KD4", "KDF")


class InsufficientInstancesError(DataFormatError):
    pass


@dataclass(frozen=True)
class KillParams:
    alpha: float = 0.05
    beta: float = 0.2
    tau: int = 1
    directional: bool = True
    ttest_variant: str = "pooled"
    one_sided: bool = False
    bonferroni: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError("tau must be a positive integer")
        if self.ttest_variant not in TTEST_VARIANTS:
            raise ValueError(f"ttest_variant must be one of {TTEST_VARIANTS}")

    @property
    def fisher_alternative(self) -> str:
        return "greater" if self.one_sided else "two-sided"


@dataclass(frozen=True)
class KillVerdict:
    definition: str
    killed: bool
    p_value: float | None = None
    statistic: float | None = None
    effect_size: float | None = None
    nki: int | None = None
    killing_input_ids: tuple[str, ...] | None = None
    per_class: Mapping[str, bool] | None = None
    class_score: float | None = None


def _ids(input_ids: Sequence[str] | None, n: int) -> Sequence[str]:
    if input_ids is None:
        return [str(j) for j in range(n)]
    if len(input_ids) != n:
        raise ValueError("input_ids length does not match the vectors")
    return input_ids


def _pair(orig, mut, dtype=None) -> tuple[np.ndarray, np.ndarray]:
    o = np.asarray(orig, dtype=dtype)
    m = np.asarray(mut, dtype=dtype)
    if o.ndim != 1 or o.shape != m.shape:
        raise ValueError("original and mutant vectors must be 1-D with equal length")
    if o.size == 0:
        raise ValueError("vectors must not be empty")
    return o, m


def kd1_killed(a_n, a_m, params: KillParams = KillParams()) -> KillVerdict:
    """Statistical killing on the accuracy samples of original (``a_n``) and mutant (``a_m``)."""
    res = two_sample_ttest(a_n, a_m, params.ttest_variant)
    d = res.effect_size
    killed = res.p_value < params.alpha and d >= params.beta
    if params.directional:
        killed = killed and float(np.mean(a_n)) > float(np.mean(a_m))
    return KillVerdict("KD1", bool(killed), p_value=res.p_value, statistic=res.statistic, effect_size=d)


def kd2_killed(orig_row, mut_row, input_ids: Sequence[str] | None = None) -> KillVerdict:
    o, m = _pair(orig_row, mut_row, bool)
    ids = _ids(input_ids, o.size)
    hits = np.flatnonzero(o & ~m)
    return KillVerdict(
        "KD2", bool(hits.size), nki=int(hits.size), killing_input_ids=tuple(ids[j] for j in hits)
    )


def kd3_killed_class(
    orig_preds, mut_preds, truth: GroundTruth | Sequence[str], input_ids: Sequence[str] | None = None
) -> KillVerdict:
    """Class-level killing; ``per_class`` maps each class to whether some input of it kills."""
    o, m = _pair(orig_preds, mut_preds, object)
    if isinstance(truth, GroundTruth):
        labels = np.asarray(truth.labels, dtype=object)
        classes = truth.classes
        if input_ids is None:
            input_ids = truth.input_ids
    else:
        labels = np.asarray(truth, dtype=object)
        classes = tuple(sorted(set(labels.tolist())))
    if labels.shape != o.shape:
        raise ValueError("ground truth is not aligned with the prediction vectors")
    ids = _ids(input_ids, o.size)
    hit = (o == labels) & (m != labels)
    killed_classes = set(labels[hit].tolist())
    per_class = {cls: cls in killed_classes for cls in classes}
    hits = np.flatnonzero(hit)
    return KillVerdict(
        "KD3",
        bool(killed_classes),
        nki=int(hits.size),
        killing_input_ids=tuple(ids[j] for j in hits),
        per_class=per_class,
        class_score=len(killed_classes) / len(classes),
    )


def kd4_killed(orig_preds, mut_preds, input_ids: Sequence[str] | None = None) -> KillVerdict:
    o, m = _pair(orig_preds, mut_preds, object)
    ids = _ids(input_ids, o.size)
    hits = np.flatnonzero(o != m)
    return KillVerdict(
        "KD4", bool(hits.size), nki=int(hits.size), killing_input_ids=tuple(ids[j] for j in hits)
    )


def kdf_input_kills(orig_col, mut_col, alpha: float = 0.05, alternative: str = "two-sided"):
    """Fisher test of one input's correctness counts.

    Returns ``(kills, p_value, table)``.
    """
    o = np.asarray(orig_col, dtype=bool)
    m = np.asarray(mut_col, dtype=bool)
    a, c = int(o.sum()), int(m.sum())
    table = ContingencyTable(a, o.size - a, c, m.size - c)
    p = fisher_exact(table, alternative).p_value
    return p < alpha, p, table


def _check_aligned(orig_cm: CorrectnessMatrix, mut_cm: CorrectnessMatrix) -> None:
    if orig_cm.input_ids != mut_cm.input_ids:
        raise DataFormatError(
            f"{orig_cm.model_id} and {mut_cm.model_id} are not aligned on the same inputs"
        )


def _subset(cm: CorrectnessMatrix, subset) -> np.ndarray:
    if subset is None:
        return np.arange(cm.n_inputs)
    idx = np.asarray(subset, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("input subset must be non-empty")
    if idx.min() < 0 or idx.max() >= cm.n_inputs:
        raise IndexError("subset index out of range")
    if np.unique(idx).size != idx.size:
        raise ValueError("subset contains duplicate indices")
    return idx


def column_pvalues(
    orig_cm: CorrectnessMatrix, mut_cm: CorrectnessMatrix, subset=None, alternative: str = "two-sided"
) -> np.ndarray:
    """Fisher p-value of every selected column, in subset order.

    Only the per-column correct counts matter, so each distinct (a, c) pair is
    tested once.
    """
    _check_aligned(orig_cm, mut_cm)
    idx = _subset(orig_cm, subset)
    r_o, r_m = orig_cm.instance_count, mut_cm.instance_count
    a = orig_cm.bits[:, idx].sum(axis=0)
    c = mut_cm.bits[:, idx].sum(axis=0)
    keys = a * (r_m + 1) + c
    uniq, inverse = np.unique(keys, return_inverse=True)
    p = np.empty(uniq.size)
    for k, key in enumerate(uniq):
        ai, ci = divmod(int(key), r_m + 1)
        p[k] = fisher_exact(ContingencyTable(ai, r_o - ai, ci, r_m - ci), alternative).p_value
    return p[inverse]


def _effective_alpha(params: KillParams, n: int) -> float:
    return params.alpha / n if params.bonferroni else params.alpha


def kdf_killed(
    orig_cm: CorrectnessMatrix, mut_cm: CorrectnessMatrix, subset=None, params: KillParams = KillParams()
) -> KillVerdict:
    idx = _subset(orig_cm, subset)
    p = column_pvalues(orig_cm, mut_cm, idx, params.fisher_alternative)
    kills = p < _effective_alpha(params, idx.size)
    ids = tuple(orig_cm.input_ids[j] for j in idx[kills])
    n_kill = len(ids)
    return KillVerdict(
        "KDF",
        n_kill >= params.tau,
        p_value=float(p.min()),
        nki=n_kill,
        killing_input_ids=ids,
    )


def nki(
    orig_cm: CorrectnessMatrix,
    mut_cm: CorrectnessMatrix,
    subset=None,
    alpha: float = 0.05,
    params: KillParams | None = None,
) -> int:
    """Number of killing inputs among the selected columns."""
    if params is None:
        params = KillParams(alpha=alpha)
    return kdf_killed(orig_cm, mut_cm, subset, params).nki


def kd1_from_matrices(
    orig_cm: CorrectnessMatrix, mut_cm: CorrectnessMatrix, subset=None, params: KillParams = KillParams()
) -> KillVerdict:
    _check_aligned(orig_cm, mut_cm)
    if orig_cm.instance_count < 2 or mut_cm.instance_count < 2:
        raise InsufficientInstancesError(
            "KD1 needs at least two instances of both the original and the mutant"
        )
    return kd1_killed(accuracy_sample(orig_cm, subset), accuracy_sample(mut_cm, subset), params)


def mutation_score(verdicts: Sequence[KillVerdict]) -> float:
    if not verdicts:
        raise ValueError("mutation score needs at least one verdict")
    kinds = {v.definition for v in verdicts}
    if len(kinds) != 1:
        raise ValueError(f"verdicts mix kill definitions: {sorted(kinds)}")
    return sum(v.killed for v in verdicts) / len(verdicts)
