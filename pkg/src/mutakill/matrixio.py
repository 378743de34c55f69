"""Prediction, ground-truth and correctness matrices, plus their CSV formats.

Predictions CSV has the header ``model_id,instance_id,input_id,predicted_label``
with one row per (instance, input) cell. Ground truth CSV has the header
``input_id,true_label``; its row order fixes the column order used everywhere
else (including the cumulative prefixes of a monotonicity audit).
"""

from __future__ import annotations

import csv
import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PREDICTION_HEADER = ("model_id", "instance_id", "input_id", "predicted_label")
TRUTH_HEADER = ("input_id", "true_label")


class DataFormatError(ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class UnknownInputError(DataFormatError):
    pass


class DuplicateRowError(DataFormatError):
    pass


class RaggedInstanceError(DataFormatError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GroundTruth:
    input_ids: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.input_ids:
            raise DataFormatError("ground truth is empty")
        if len(self.input_ids) != len(self.labels):
            raise DataFormatError("ground truth ids and labels differ in length")
        if len(set(self.input_ids)) != len(self.input_ids):
            raise DataFormatError("ground truth input ids are not unique")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GroundTruth":
        ids, labels = [], []
        for input_id, label in pairs:
            ids.append(input_id)
            labels.append(label)
        return cls(tuple(ids), tuple(labels))

    def __len__(self) -> int:
        return len(self.input_ids)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))


@dataclass(frozen=True)
class PredictionMatrix:
    model_id: str
    predictions: np.ndarray  # (instances, inputs) array of str labels
    input_ids: tuple[str, ...]
    instance_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        preds = np.asarray(self.predictions, dtype=object)
        if preds.ndim != 2:
            raise DataFormatError(f"{self.model_id}: predictions must be a 2-D matrix")
        if preds.shape[0] < 1:
            raise DataFormatError(f"{self.model_id}: at least one instance is required")
        if preds.shape[1] != len(self.input_ids):
            raise DataFormatError(f"{self.model_id}: column count does not match input ids")
        object.__setattr__(self, "predictions", _frozen(preds))
        if not self.instance_ids:
            object.__setattr__(self, "instance_ids", tuple(str(i) for i in range(preds.shape[0])))
        elif len(self.instance_ids) != preds.shape[0]:
            raise DataFormatError(f"{self.model_id}: instance ids do not match row count")

    @property
    def instance_count(self) -> int:
        return self.predictions.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.predictions.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PredictionMatrix):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.input_ids == other.input_ids
            and self.instance_ids == other.instance_ids
            and np.array_equal(self.predictions, other.predictions)
        )

    __hash__ = None


@dataclass(frozen=True)
class CorrectnessMatrix:
    model_id: str
    bits: np.ndarray  # (instances, inputs) bool
    input_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] < 1:
            raise DataFormatError(f"{self.model_id}: bits must be a non-empty 2-D matrix")
        object.__setattr__(self, "bits", _frozen(bits))
        if not self.input_ids:
            object.__setattr__(self, "input_ids", tuple(str(j) for j in range(bits.shape[1])))
        elif len(self.input_ids) != bits.shape[1]:
            raise DataFormatError(f"{self.model_id}: column count does not match input ids")

    @property
    def instance_count(self) -> int:
        return self.bits.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.bits.shape[1]

    def __eq__(self, other):
        if not isinstance(other, CorrectnessMatrix):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.input_ids == other.input_ids
            and np.array_equal(self.bits, other.bits)
        )

    __hash__ = None


def correctness(pm: PredictionMatrix, gt: GroundTruth) -> CorrectnessMatrix:
    if pm.input_ids != gt.input_ids:
        raise DataFormatError(f"{pm.model_id}: columns are not aligned with the ground truth")
    truth = np.asarray(gt.labels, dtype=object)
    return CorrectnessMatrix(pm.model_id, pm.predictions == truth[None, :], gt.input_ids)


def accuracy_sample(cm: CorrectnessMatrix, subset: Sequence[int] | None = None) -> np.ndarray:
    """Per-instance accuracy over the selected columns (all columns if ``subset`` is None)."""
    if subset is None:
        return cm.bits.mean(axis=1)
    idx = np.asarray(subset, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("accuracy is undefined on an empty input subset")
    if idx.min() < 0 or idx.max() >= cm.n_inputs:
        raise IndexError("subset index out of range")
    if np.unique(idx).size != idx.size:
        raise ValueError("subset contains duplicate indices")
    return cm.bits[:, idx].sum(axis=1) / idx.size


def _instance_sort_key(instance_id: str):
    # numeric ids sort numerically so "10" follows "9"
    return (0, int(instance_id), "") if instance_id.isdigit() else (1, 0, instance_id)


def _open_csv(path: str | Path, header: tuple[str, ...]):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    first = next(reader, None)
    if first is None or tuple(c.strip() for c in first) != header:
        fh.close()
        raise DataFormatError(f"expected header {','.join(header)}", str(path), 1)
    return fh, reader


def load_truth(path: str | Path) -> GroundTruth:
    fh, reader = _open_csv(path, TRUTH_HEADER)
    ids, labels, seen = [], [], set()
    with fh:
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError("expected 2 fields", str(path), reader.line_num)
            input_id, label = row[0].strip(), row[1].strip()
            if input_id in seen:
                raise DuplicateRowError(f"duplicate input_id {input_id!r}", str(path), reader.line_num)
            seen.add(input_id)
            ids.append(input_id)
            labels.append(label)
    if not ids:
        raise DataFormatError("ground truth is empty", str(path))
    return GroundTruth(tuple(ids), tuple(labels))


def load_predictions(path: str | Path, truth_path: str | Path) -> tuple[GroundTruth, list[PredictionMatrix]]:
    """Load a predictions CSV and align every model to the ground-truth column order.

    Models come back sorted by ``model_id``; instances within a model are
    re-indexed densely in instance-id order.
    """
    gt = load_truth(truth_path)
    col = {input_id: j for j, input_id in enumerate(gt.input_ids)}
    cells: dict[str, dict[str, dict[int, str]]] = defaultdict(lambda: defaultdict(dict))

    fh, reader = _open_csv(path, PREDICTION_HEADER)
    with fh:
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError("expected 4 fields", str(path), reader.line_num)
            model_id, instance_id, input_id, label = (c.strip() for c in row)
            j = col.get(input_id)
            if j is None:
                raise UnknownInputError(
                    f"input_id {input_id!r} is not in the ground truth", str(path), reader.line_num
                )
            inst = cells[model_id][instance_id]
            if j in inst:
                raise DuplicateRowError(
                    f"duplicate row for model {model_id!r}, instance {instance_id!r}, input {input_id!r}",
                    str(path),
                    reader.line_num,
                )
            inst[j] = label

    if not cells:
        raise DataFormatError("no prediction rows", str(path))

    n = len(gt)
    matrices = []
    for model_id in sorted(cells):
        instances = cells[model_id]
        order = sorted(instances, key=_instance_sort_key)
        preds = np.empty((len(order), n), dtype=object)
        for i, instance_id in enumerate(order):
            inst = instances[instance_id]
            if len(inst) != n:
                missing = next(gt.input_ids[j] for j in range(n) if j not in inst)
                raise RaggedInstanceError(
                    f"model {model_id!r} instance {instance_id!r} has no prediction for input {missing!r}",
                    str(path),
                )
            preds[i] = [inst[j] for j in range(n)]
        matrices.append(PredictionMatrix(model_id, preds, gt.input_ids, tuple(order)))
    return gt, matrices


def write_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        w.writerows(zip(gt.input_ids, gt.labels))


def write_predictions(matrices: Iterable[PredictionMatrix], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_HEADER)
        for pm in matrices:
            for instance_id, row in zip(pm.instance_ids, pm.predictions):
                for input_id, label in zip(pm.input_ids, row):
                    w.writerow((pm.model_id, instance_id, input_id, label))


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
