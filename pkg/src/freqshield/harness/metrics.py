"""Binary detection metrics and the per-sample prediction files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyTestSet, ImageIOError


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "EvalReport":
        total = tp + fp + tn + fn
        if total == 0:
            raise EmptyTestSet("no samples to score")
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp, fp, tn, fn, (tp + tn) / total, precision, recall, f1)

    @classmethod
    def from_predictions(cls, labels, preds) -> "EvalReport":
        y = np.asarray(labels, dtype=np.int64)
        p = np.asarray(preds, dtype=np.int64)
        if y.size == 0:
            raise EmptyTestSet("no samples to score")
        return cls.from_counts(
            int(np.sum((p == 1) & (y == 1))), int(np.sum((p == 1) & (y == 0))),
            int(np.sum((p == 0) & (y == 0))), int(np.sum((p == 0) & (y == 1))),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        except OSError as exc:
            raise ImageIOError(f"cannot write report {path}: {exc}") from exc


def write_predictions_csv(rows, path) -> None:
    """``rows`` are ``(id, label, pred, prob)`` with prob = P(watermarked)."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "label", "pred", "prob"])
            for rid, label, pred, prob in rows:
                w.writerow([rid, int(label), int(pred), f"{float(prob):.6f}"])
    except OSError as exc:
        raise ImageIOError(f"cannot write predictions {path}: {exc}") from exc


def read_predictions_csv(path) -> list[tuple[str, int, int, float]]:
    with open(path, newline="") as fh:
        return [(r["id"], int(r["label"]), int(r["pred"]), float(r["prob"])) for r in csv.DictReader(fh)]
