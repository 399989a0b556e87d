"""Reconstruction quality metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EvaluationReport",
    "relative_error",
    "relative_error_per_slice",
    "contrast_relative_error",
    "crosstalk_index",
    "evaluate",
]


def _check(estimate, ground_truth):
    if estimate.slices.shape != ground_truth.slices.shape or estimate.grid != ground_truth.grid:
        raise ValueError("estimate and ground truth have different geometry")


def relative_error(estimate, ground_truth) -> float:
    """100 * ||n_gt - n|| / ||n_gt|| over all voxels, background included."""
    _check(estimate, ground_truth)
    ref = np.linalg.norm(ground_truth.slices)
    if ref == 0:
        raise ValueError("ground truth has zero norm")
    return float(100.0 * np.linalg.norm(ground_truth.slices - estimate.slices) / ref)


def relative_error_per_slice(estimate, ground_truth) -> list[float]:
    _check(estimate, ground_truth)
    out = []
    for gt, est in zip(ground_truth.slices, estimate.slices):
        out.append(float(100.0 * np.linalg.norm(gt - est) / np.linalg.norm(gt)))
    return out


def contrast_relative_error(estimate, ground_truth) -> float:
    """Like :func:`relative_error` but normalized by the contrast n_gt - n_medium.

    Not the headline metric: the background-referred version is much less
    sensitive because the medium index dominates its denominator.
    """
    _check(estimate, ground_truth)
    ref = np.linalg.norm(ground_truth.slices - ground_truth.n_medium)
    if ref == 0:
        raise ValueError("ground truth has no contrast")
    return float(100.0 * np.linalg.norm(ground_truth.slices - estimate.slices) / ref)


def _supports(ground_truth) -> np.ndarray:
    return ground_truth.slices != ground_truth.n_medium


def crosstalk_index(estimate, ground_truth, j: int) -> float:
    """Leakage of other slices' features into slice ``j`` (1-based).

    Error energy of slice j restricted to the union of the other slices'
    supports, divided by the contrast energy of slice j's ground truth.
    """
    _check(estimate, ground_truth)
    n = ground_truth.slices.shape[0]
    if not 1 <= j <= n:
        raise IndexError(f"slice index {j} out of range 1..{n}")
    supports = _supports(ground_truth)
    others = np.zeros(supports.shape[1:], dtype=bool)
    for k in range(n):
        if k != j - 1:
            others |= supports[k]
    gt = ground_truth.slices[j - 1]
    contrast = float(np.sum((gt - ground_truth.n_medium) ** 2))
    if contrast == 0:
        raise ValueError(f"slice {j} of the ground truth has no contrast")
    err = (gt - estimate.slices[j - 1])[others]
    return float(np.sum(err ** 2) / contrast)


@dataclass
class EvaluationReport:
    e_percent_global: float
    e_percent_per_slice: list = field(default_factory=list)
    crosstalk_index_per_slice: list = field(default_factory=list)
    e_percent_contrast: float = float("nan")
    runtime_seconds: float = float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slice", "e_percent", "crosstalk_index"])
        for j, (e, c) in enumerate(zip(self.e_percent_per_slice, self.crosstalk_index_per_slice), 1):
            w.writerow([j, repr(e), repr(c)])
        w.writerow(["global", repr(self.e_percent_global), ""])
        w.writerow(["contrast", repr(self.e_percent_contrast), ""])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"E% global: {self.e_percent_global:.6f}"]
        lines.append(f"E% contrast-referred: {self.e_percent_contrast:.4f}")
        for j, (e, c) in enumerate(zip(self.e_percent_per_slice, self.crosstalk_index_per_slice), 1):
            lines.append(f"slice {j}: E% {e:.6f}  crosstalk {c:.6f}")
        return "\n".join(lines) + "\n"


def evaluate(estimate, ground_truth, runtime_seconds: float = float("nan")) -> EvaluationReport:
    n = ground_truth.n_slices
    xt = [crosstalk_index(estimate, ground_truth, j) if n > 1 else 0.0 for j in range(1, n + 1)]
    return EvaluationReport(
        relative_error(estimate, ground_truth),
        relative_error_per_slice(estimate, ground_truth),
        xt,
        contrast_relative_error(estimate, ground_truth),
        runtime_seconds,
    )
