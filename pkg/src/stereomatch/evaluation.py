"""Accuracy metrics for a disparity map against ground truth.

All error statistics use the pixels valid in *both* maps. Errors are capped
at ``sigma`` before averaging, and the cap value itself lands in the last
histogram bin.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, EvaluationError
from .image_io import DisparityMap, save_pgm

__all__ = [
    "EvalConfig",
    "EvalReport",
    "absolute_accuracy",
    "systematic_error",
    "completeness",
    "error_histogram",
    "evaluate",
    "write_report",
    "load_report",
    "histogram_csv_path",
    "save_error_image",
]


@dataclass(frozen=True)
class EvalConfig:
    sigma: float = 10.0
    bin_width: float = 0.1

    def __post_init__(self):
        if not self.sigma > 0 or not self.bin_width > 0:
            raise ValueError("sigma and bin_width must be positive")
        n = self.sigma / self.bin_width
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"sigma={self.sigma} is not a multiple of bin_width={self.bin_width}")

    @property
    def n_bins(self) -> int:
        return int(round(self.sigma / self.bin_width))

    def bin_edges(self) -> np.ndarray:
        # k * sigma / n rounds each edge once, so 0.3 is exactly float(0.3)
        n = self.n_bins
        return np.arange(n + 1, dtype=np.float64) * self.sigma / n


@dataclass
class EvalReport:
    m_ab: float
    m_sys: float
    m_cpl: float
    histogram: list
    n_valid: int
    n_invalid: int
    n_evaluated: int
    sigma: float
    bin_width: float
    bin_sums: list = field(default_factory=list, repr=False)

    def bin_lowers(self) -> list:
        return EvalConfig(self.sigma, self.bin_width).bin_edges()[:-1].tolist()

    def to_dict(self) -> dict:
        return {
            "m_ab": self.m_ab,
            "m_sys": self.m_sys,
            "m_cpl": self.m_cpl,
            "n_valid": self.n_valid,
            "n_invalid": self.n_invalid,
            "n_evaluated": self.n_evaluated,
            "sigma": self.sigma,
            "bin_width": self.bin_width,
            "histogram": list(self.histogram),
        }


def _capped_errors(d: DisparityMap, truth: DisparityMap, cfg: EvalConfig) -> np.ndarray:
    if d.shape != truth.shape:
        raise DimensionError(f"estimate {d.shape} and truth {truth.shape} differ")
    both = d.valid & truth.valid
    if not both.any():
        raise EvaluationError("no pixel is valid in both the estimate and the truth")
    return d.data[both].astype(np.float64) - truth.data[both].astype(np.float64)


def absolute_accuracy(d: DisparityMap, truth: DisparityMap, cfg: EvalConfig = EvalConfig()) -> float:
    """Mean of ``min(|d - d_g|, sigma)`` over co-valid pixels."""
    e = _capped_errors(d, truth, cfg)
    return float(np.mean(np.minimum(np.abs(e), cfg.sigma)))


def systematic_error(d: DisparityMap, truth: DisparityMap, cfg: EvalConfig = EvalConfig()) -> float:
    """Signed mean of the capped errors; ``sign(0) == 0``."""
    e = _capped_errors(d, truth, cfg)
    return float(np.mean(np.sign(e) * np.minimum(np.abs(e), cfg.sigma)))


def completeness(d: DisparityMap) -> float:
    """``1 - n_invalid / n_valid``. Can go negative when most pixels are invalid."""
    if d.n_valid == 0:
        raise EvaluationError("completeness is undefined with zero valid pixels")
    return 1.0 - d.n_invalid / d.n_valid


def _binned(capped: np.ndarray, cfg: EvalConfig) -> tuple[np.ndarray, np.ndarray]:
    edges = cfg.bin_edges()
    idx = np.searchsorted(edges, capped, side="right") - 1
    idx = np.clip(idx, 0, cfg.n_bins - 1)
    counts = np.bincount(idx, minlength=cfg.n_bins)
    sums = np.bincount(idx, weights=capped, minlength=cfg.n_bins)
    return counts, sums


def error_histogram(d: DisparityMap, truth: DisparityMap, cfg: EvalConfig = EvalConfig()) -> np.ndarray:
    """Counts of capped absolute errors per ``bin_width`` bin over ``[0, sigma]``."""
    e = _capped_errors(d, truth, cfg)
    return _binned(np.minimum(np.abs(e), cfg.sigma), cfg)[0]


def evaluate(d: DisparityMap, truth: DisparityMap, cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """All metrics from one pass over the co-valid errors."""
    e = _capped_errors(d, truth, cfg)
    capped = np.minimum(np.abs(e), cfg.sigma)
    counts, sums = _binned(capped, cfg)
    return EvalReport(
        m_ab=float(np.mean(capped)),
        m_sys=float(np.mean(np.sign(e) * capped)),
        m_cpl=completeness(d),
        histogram=[int(c) for c in counts],
        n_valid=d.n_valid,
        n_invalid=d.n_invalid,
        n_evaluated=int(capped.size),
        sigma=float(cfg.sigma),
        bin_width=float(cfg.bin_width),
        bin_sums=sums.tolist(),
    )


def histogram_csv_path(json_path) -> Path:
    p = Path(json_path)
    return p.with_name(p.stem + "_histogram.csv")


def write_report(r: EvalReport, path) -> Path:
    """Write the JSON report and its ``<stem>_histogram.csv`` sidecar; returns the CSV path."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(r.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    csv_path = histogram_csv_path(path)
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_lower", "count"])
        for lower, count in zip(r.bin_lowers(), r.histogram):
            writer.writerow([repr(float(lower)), int(count)])
    return csv_path


def load_report(path) -> EvalReport:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    return EvalReport(
        m_ab=doc["m_ab"],
        m_sys=doc["m_sys"],
        m_cpl=doc["m_cpl"],
        histogram=doc["histogram"],
        n_valid=doc["n_valid"],
        n_invalid=doc["n_invalid"],
        n_evaluated=doc["n_evaluated"],
        sigma=doc["sigma"],
        bin_width=doc["bin_width"],
    )


def save_error_image(d: DisparityMap, truth: DisparityMap, path, cfg: EvalConfig = EvalConfig()) -> None:
    """Dump ``min(|d - d_g|, sigma) / sigma`` as an 8-bit PGM; non-evaluated pixels are black."""
    if d.shape != truth.shape:
        raise DimensionError(f"estimate {d.shape} and truth {truth.shape} differ")
    both = d.valid & truth.valid
    err = np.abs(d.data.astype(np.float64) - truth.data.astype(np.float64))
    img = np.where(both, np.minimum(err, cfg.sigma) / cfg.sigma, 0.0)
    save_pgm(img, path)
