"""Kill status over cumulative test-set prefixes.

A kill definition is monotone when a test set that kills a mutant keeps
killing it as inputs are added. ``audit`` evaluates one definition on the
prefixes ``[0, s)`` for a grid of sizes and records every place where a
killed prefix is followed by a larger prefix that does not kill.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .killdefs import (
    DEFINITIONS,
    InsufficientInstancesError,
    KillParams,
    column_pvalues,
    kd1_killed,
    kd2_killed,
    kd3_killed_class,
    kd4_killed,
)
from .matrixio import CorrectnessMatrix, DataFormatError, GroundTruth, PredictionMatrix, correctness

TRACE_HEADER = ("size", "killed", "p_value", "effect_size", "nki")


class AuditConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AuditConfig:
    definition: str = "KD1"
    params: KillParams = field(default_factory=KillParams)
    start: int = 100
    step: int = 100
    end: int | None = None
    pair: tuple[int, int] = (0, 0)
    shuffle_seed: int | None = None

    def __post_init__(self):
        if self.definition not in DEFINITIONS:
            raise AuditConfigError(f"unknown kill definition {self.definition!r}")
        if self.start < 1 or self.step < 1:
            raise AuditConfigError("start and step must be positive")
        if self.end is not None and self.end < self.start:
            raise AuditConfigError("end must not be smaller than start")

    def sizes(self, n_inputs: int) -> list[int]:
        end = n_inputs if self.end is None else self.end
        if end > n_inputs or self.start > n_inputs:
            raise AuditConfigError(f"prefix sizes exceed the {n_inputs} available inputs")
        sizes = list(range(self.start, end + 1, self.step))
        if sizes[-1] != end:
            sizes.append(end)
        return sizes


@dataclass
class AuditTrace:
    definition: str
    sizes: list[int]
    killed: list[bool]
    p_values: list[float | None]
    effect_sizes: list[float | None]
    nki: list[int | None]
    violations: list[tuple[int, int]] = field(default_factory=list)
    witness_pairs: int = 0

    @property
    def monotone(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in zip(self.sizes, self.killed, self.p_values, self.effect_sizes, self.nki):
            s, k, p, d, n = row
            w.writerow((s, "true" if k else "false", _fmt(p), _fmt(d), "" if n is None else n))
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "definition": self.definition,
            "monotone": self.monotone,
            "violations": [list(v) for v in self.violations],
            "witness_pairs": self.witness_pairs,
            "first_killed_size": next((s for s, k in zip(self.sizes, self.killed) if k), None),
            "n_sizes": len(self.sizes),
        }


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def is_monotone(trace: AuditTrace | list[bool]) -> bool:
    killed = trace.killed if isinstance(trace, AuditTrace) else list(trace)
    seen = False
    for k in killed:
        if seen and not k:
            return False
        seen = seen or k
    return True


def find_violations(sizes: list[int], killed: list[bool]) -> tuple[list[tuple[int, int]], int]:
    """Consecutive killed -> not-killed transitions and the number of all witnessing pairs."""
    transitions = [
        (sizes[i], sizes[i + 1]) for i in range(len(killed) - 1) if killed[i] and not killed[i + 1]
    ]
    pairs = 0
    killed_before = 0
    for k in killed:
        if not k:
            pairs += killed_before
        else:
            killed_before += 1
    return transitions, pairs


def _permute(x, perm):
    if isinstance(x, PredictionMatrix):
        return PredictionMatrix(
            x.model_id, x.predictions[:, perm], tuple(x.input_ids[j] for j in perm), x.instance_ids
        )
    if isinstance(x, CorrectnessMatrix):
        return CorrectnessMatrix(x.model_id, x.bits[:, perm], tuple(x.input_ids[j] for j in perm))
    return GroundTruth(tuple(x.input_ids[j] for j in perm), tuple(x.labels[j] for j in perm))


def audit(orig, mut, cfg: AuditConfig, truth: GroundTruth | None = None) -> AuditTrace:
    """Sweep cumulative prefixes of the input order and evaluate ``cfg.definition`` on each.

    ``orig`` and ``mut`` are both PredictionMatrix (``truth`` required) or both
    CorrectnessMatrix. KD3 and KD4 need predicted labels and so require
    prediction matrices.
    """
    preds = isinstance(orig, PredictionMatrix)
    if preds != isinstance(mut, PredictionMatrix):
        raise TypeError("orig and mut must be the same kind of matrix")
    if preds and truth is None:
        raise ValueError("ground truth is required for prediction matrices")
    if not preds and cfg.definition in ("KD3", "KD4"):
        raise AuditConfigError(f"{cfg.definition} needs predicted labels, not correctness bits")
    if orig.input_ids != mut.input_ids:
        raise DataFormatError(f"{orig.model_id} and {mut.model_id} are not aligned on the same inputs")

    n = orig.n_inputs
    sizes = cfg.sizes(n)
    if cfg.shuffle_seed is not None:
        perm = np.random.default_rng(cfg.shuffle_seed).permutation(n)
        orig, mut = _permute(orig, perm), _permute(mut, perm)
        truth = _permute(truth, perm) if truth is not None else None

    if preds:
        orig_cm, mut_cm = correctness(orig, truth), correctness(mut, truth)
    else:
        orig_cm, mut_cm = orig, mut

    killed: list[bool] = []
    p_values: list[float | None] = []
    effects: list[float | None] = []
    nkis: list[int | None] = []
    params = cfg.params
    definition = cfg.definition

    if definition == "KD1":
        if orig_cm.instance_count < 2 or mut_cm.instance_count < 2:
            raise InsufficientInstancesError("KD1 needs at least two instances of both models")
        cum_o = np.cumsum(orig_cm.bits, axis=1)
        cum_m = np.cumsum(mut_cm.bits, axis=1)
        for s in sizes:
            v = kd1_killed(cum_o[:, s - 1] / s, cum_m[:, s - 1] / s, params)
            killed.append(v.killed)
            p_values.append(v.p_value)
            effects.append(v.effect_size)
            nkis.append(None)
    elif definition == "KDF":
        p = column_pvalues(orig_cm, mut_cm, alternative=params.fisher_alternative)
        running_min = np.minimum.accumulate(p)
        for s in sizes:
            alpha = params.alpha / s if params.bonferroni else params.alpha
            count = int(np.count_nonzero(p[:s] < alpha))
            killed.append(count >= params.tau)
            p_values.append(float(running_min[s - 1]))
            effects.append(None)
            nkis.append(count)
    else:
        i_o, i_m = cfg.pair
        if not (0 <= i_o < orig_cm.instance_count and 0 <= i_m < mut_cm.instance_count):
            raise AuditConfigError(f"instance pair {cfg.pair} is out of range")
        for s in sizes:
            if definition == "KD2":
                v = kd2_killed(orig_cm.bits[i_o, :s], mut_cm.bits[i_m, :s])
            elif definition == "KD3":
                v = kd3_killed_class(orig.predictions[i_o, :s], mut.predictions[i_m, :s], truth.labels[:s])
            else:
                v = kd4_killed(orig.predictions[i_o, :s], mut.predictions[i_m, :s])
            killed.append(v.killed)
            p_values.append(None)
            effects.append(None)
            nkis.append(None)

    violations, witnesses = find_violations(sizes, killed)
    return AuditTrace(definition, sizes, killed, p_values, effects, nkis, violations, witnesses)
