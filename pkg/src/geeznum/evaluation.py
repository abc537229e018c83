"""Accuracy, confusion matrices and the train/test/overall report."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import N_CLASSES, ClassId, Dataset, decode_batch, decode_prediction
from .errors import DimensionError, EmptyDatasetError
from .network import forward

# Reference figures reported for the original (unpublished) scan collection.
REFERENCE_TRAIN_ACCURACY = 0.9803
REFERENCE_TEST_ACCURACY = 0.653
REFERENCE_OVERALL_ACCURACY = 0.8988


def predict(model, x) -> ClassId:
    x = np.asarray(x)
    if x.ndim != 1:
        raise DimensionError(f"predict takes one feature vector, got shape {x.shape}")
    out, _ = forward(model.params, x)
    return decode_prediction(out, model.encoding)


def predict_batch(model, X) -> np.ndarray:
    """Class ids for each row; undecodable binary-5 outputs give -1."""
    out, _ = forward(model.params, np.atleast_2d(X))
    return decode_batch(out, model.encoding)


@dataclass
class Metrics:
    """Counts for one split.

    ``confusion[i, j]`` counts samples of true class ``i`` predicted as ``j``.
    Binary-5 outputs that decode to no class are counted as errors in
    ``rejected`` instead, so ``confusion.sum() + rejected.sum() == n_samples``.
    """

    split: str
    confusion: np.ndarray
    rejected: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum() + self.rejected.sum())

    @property
    def n_correct(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_samples

    @property
    def class_counts(self) -> np.ndarray:
        return self.confusion.sum(axis=1) + self.rejected

    @property
    def per_class_accuracy(self) -> np.ndarray:
        counts = self.class_counts
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, np.diag(self.confusion) / np.maximum(counts, 1), np.nan)

    @classmethod
    def from_predictions(cls, y_true, y_pred, split: str = "") -> "Metrics":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.size == 0:
            raise EmptyDatasetError("cannot evaluate an empty split")
        ok = y_pred >= 0
        confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        np.add.at(confusion, (y_true[ok], y_pred[ok]), 1)
        rejected = np.bincount(y_true[~ok], minlength=N_CLASSES).astype(np.int64)
        return cls(split, confusion, rejected)


def evaluate(model, split: Dataset, name: str = "") -> Metrics:
    if len(split) == 0:
        raise EmptyDatasetError("cannot evaluate an empty split")
    return Metrics.from_predictions(split.labels, predict_batch(model, split.features), name)


def write_metrics_csv(metrics: Metrics, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "n", "correct", "accuracy"])
        w.writerow([metrics.split, metrics.n_samples, metrics.n_correct, repr(metrics.accuracy)])


def write_confusion_csv(metrics: Metrics, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{k:02d}" for k in range(N_CLASSES)])
        w.writerows(metrics.confusion.tolist())


def read_metrics_csv(path: str | os.PathLike) -> dict:
    with open(path, newline="") as fh:
        row = next(csv.DictReader(fh))
    return {"split": row["split"], "n": int(row["n"]), "correct": int(row["correct"]),
            "accuracy": float(row["accuracy"])}


@dataclass
class OverallReport:
    """Train and test metrics side by side; ``test`` may be absent (toy runs)."""

    train: Metrics
    test: Metrics | None = None

    @property
    def _splits(self) -> list[Metrics]:
        return [m for m in (self.train, self.test) if m is not None]

    @property
    def pooled_accuracy(self) -> float:
        """Accuracy over train and test together, weighted by sample counts."""
        return sum(m.n_correct for m in self._splits) / sum(m.n_samples for m in self._splits)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.accuracy for m in self._splits]))

    def to_text(self) -> str:
        refs = {"train": REFERENCE_TRAIN_ACCURACY, "test": REFERENCE_TEST_ACCURACY}
        rows = [(m.split, m.n_samples, m.n_correct, m.accuracy, refs.get(m.split, float("nan")))
                for m in self._splits]
        rows.append(("pooled", sum(m.n_samples for m in self._splits), sum(m.n_correct for m in self._splits),
                     self.pooled_accuracy, REFERENCE_OVERALL_ACCURACY))
        lines = [f"{'split':<8}{'n':>6}{'correct':>9}{'accuracy':>10}{'ref':>9}"]
        for name, n, c, acc, ref in rows:
            lines.append(f"{name:<8}{n:>6}{c:>9}{acc * 100:>9.2f}%{ref * 100:>8.2f}%")
        lines.append(f"(unweighted mean of train/test: {self.mean_accuracy * 100:.2f}%; "
                     f"the reference overall figure is not derivable from the reference train/test figures)")
        for m in self._splits:
            lines.append("")
            lines.append(f"confusion ({m.split}; rows true, cols predicted)")
            lines.append("    " + " ".join(f"{k:02d}" for k in range(N_CLASSES)))
            for k, row in enumerate(m.confusion):
                lines.append(f"{k:02d}  " + " ".join(f"{v:>2d}" for v in row))
            if m.rejected.any():
                lines.append(f"undecodable outputs per class: {m.rejected.tolist()}")
        return "\n".join(lines) + "\n"

    def write_csv(self, out_dir: str | os.PathLike) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for m in self._splits:
            write_metrics_csv(m, out / f"metrics_{m.split}.csv")
            write_confusion_csv(m, out / f"confusion_{m.split}.csv")


def overall_report(train: Metrics, test: Metrics | None = None) -> OverallReport:
    return OverallReport(train, test)
