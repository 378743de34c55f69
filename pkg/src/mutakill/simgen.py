"""Synthetic correctness matrices.

``generate`` draws cells from per-block success probabilities. The generator
is numpy's PCG64 seeded with the scenario seed; the original matrix is drawn
first in row-major order, then the mutant matrix, one uniform double per
cell, and a cell is correct when its draw is below the block probability.

``adversarial_kd1`` is a fixed, randomness-free pair of matrices on which the
KD1 verdict flips from killed to not killed as the test set grows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .matrixio import CorrectnessMatrix, GroundTruth, PredictionMatrix

WRONG_SUFFIX = "_X"


@dataclass(frozen=True)
class Block:
    width: int
    p_orig: float
    p_mut: float


@dataclass(frozen=True)
class ScenarioSpec:
    n_inputs: int
    r_orig: int
    r_mut: int
    blocks: tuple[Block, ...]
    seed: int = 0

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, Block) else Block(*b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if self.n_inputs < 1 or self.r_orig < 1 or self.r_mut < 1:
            raise ValueError("n_inputs, r_orig and r_mut must be positive")
        if any(b.width < 1 for b in blocks):
            raise ValueError("block widths must be positive")
        if sum(b.width for b in blocks) != self.n_inputs:
            raise ValueError("block widths must add up to n_inputs")
        for b in blocks:
            if not (0.0 <= b.p_orig <= 1.0 and 0.0 <= b.p_mut <= 1.0):
                raise ValueError("block probabilities must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        blocks = tuple(
            Block(int(b["width"]), float(b["p_orig"]), float(b["p_mut"])) if isinstance(b, dict) else Block(*b)
            for b in data["blocks"]
        )
        n_inputs = int(data.get("n_inputs", sum(b.width for b in blocks)))
        return cls(n_inputs, int(data["r_orig"]), int(data["r_mut"]), blocks, int(data.get("seed", 0)))

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def generate(
    spec: ScenarioSpec, orig_id: str = "original", mut_id: str = "mutant"
) -> tuple[CorrectnessMatrix, CorrectnessMatrix]:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    p_orig = np.repeat([b.p_orig for b in spec.blocks], [b.width for b in spec.blocks])
    p_mut = np.repeat([b.p_mut for b in spec.blocks], [b.width for b in spec.blocks])
    orig = rng.random((spec.r_orig, spec.n_inputs)) < p_orig
    mut = rng.random((spec.r_mut, spec.n_inputs)) < p_mut
    ids = input_ids(spec.n_inputs)
    return CorrectnessMatrix(orig_id, orig, ids), CorrectnessMatrix(mut_id, mut, ids)


def adversarial_kd1(
    r: int = 20, k_strong: int = 100, k_noise: int = 9900, orig_id: str = "original", mut_id: str = "mutant"
) -> tuple[CorrectnessMatrix, CorrectnessMatrix]:
    """Matrices whose KD1 verdict is killed on the strong block and lost on the full set.

    Strong block (first ``k_strong`` columns): every original instance is
    correct; mutant instance i is wrong on column j iff ``(j - i) % 5 < 2``,
    i.e. 60% accuracy with no spread between instances.

    Noise block (remaining ``k_noise`` columns), identical for both models:
    instance i is correct on noise column j iff ``j % r <= i``. Instance
    accuracies on this block form a staircase from 1/r to 1, so the
    within-group spread grows with every noise column while the mean gap
    stays fixed at ``0.4 * k_strong`` correct answers.
    """
    if r < 4 or r % 2:
        raise ValueError("r must be an even number >= 4")
    if k_strong < 1 or k_noise < 1:
        raise ValueError("k_strong and k_noise must be positive")
    i = np.arange(r)[:, None]
    js = np.arange(k_strong)[None, :]
    jn = np.arange(k_noise)[None, :]
    noise = (jn % r) <= i
    orig = np.hstack([np.ones((r, k_strong), dtype=bool), noise])
    mut = np.hstack([(js - i) % 5 >= 2, noise])
    ids = input_ids(k_strong + k_noise)
    return CorrectnessMatrix(orig_id, orig, ids), CorrectnessMatrix(mut_id, mut, ids)


def input_ids(n: int) -> tuple[str, ...]:
    width = len(str(max(n - 1, 0)))
    return tuple(f"x{j:0{width}d}" for j in range(n))


def to_predictions(
    matrices: Sequence[CorrectnessMatrix], n_classes: int = 10
) -> tuple[GroundTruth, list[PredictionMatrix]]:
    """Synthesize labels for correctness matrices.

    Input j has true label ``str(j % n_classes)``; correct cells predict the
    true label and incorrect cells predict the true label plus ``"_X"``.
    """
    ids = matrices[0].input_ids
    truth = np.array([str(j % n_classes) for j in range(len(ids))], dtype=object)
    wrong = np.array([t + WRONG_SUFFIX for t in truth], dtype=object)
    gt = GroundTruth(tuple(ids), tuple(truth.tolist()))
    out = []
    for cm in matrices:
        if cm.input_ids != ids:
            raise ValueError("matrices are not aligned")
        preds = np.where(cm.bits, truth[None, :], wrong[None, :])
        out.append(PredictionMatrix(cm.model_id, preds, ids, tuple(str(k) for k in range(cm.instance_count))))
    return gt, out
