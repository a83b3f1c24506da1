"""Benchmark error measures and the surrogate score normalization.

Three raw errors are computed:

* short-time: RMSE over the first ``k`` forecast steps,
* long-time: L2 distance between per-coordinate marginal histograms on shared
  bin edges,
* reconstruction: length-normalized RMS error against the clean reference.

:func:`normalize_score` maps a raw error onto ``[-100, 100]`` relative to a
naive reference error. This is a documented surrogate, not the official
leaderboard formula, so scores are not comparable with published numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import check_trajectory

N_BINS = 41
SHORT_TIME_STEPS = 20
EDGE_MARGIN = 0.05
FEWSHOT_EDGE_MARGIN = 0.20

METRIC_KINDS = ("short_time", "long_time", "reconstruction")


@dataclass(frozen=True, eq=False)
class HistogramSignature:
    """Normalized per-coordinate histograms; ``edges[i]`` has ``B + 1`` entries."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]


def short_time_rmse(pred, truth, k: int = SHORT_TIME_STEPS) -> float:
    pred = check_trajectory(pred, name="pred")
    truth = check_trajectory(truth, name="truth")
    if len(pred) < k or len(truth) < k:
        raise ValueError(f"need at least k={k} steps, got {len(pred)} and {len(truth)}")
    if pred.shape[1] != truth.shape[1]:
        raise ValueError("pred and truth have different dimensions")
    diff = pred[:k] - truth[:k]
    return float(np.sqrt(np.mean(diff * diff)))


def reconstruction_error(pred, truth) -> float:
    pred = check_trajectory(pred, name="pred")
    truth = check_trajectory(truth, name="truth")
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    diff = pred - truth
    return float(np.sqrt(np.mean(diff * diff)))


def bin_edges(reference, n_bins: int = N_BINS, margin: float = EDGE_MARGIN) -> np.ndarray:
    """Per-coordinate edges spanning the data range widened by ``margin`` on each side."""
    X = check_trajectory(reference, name="reference")
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    # constant coordinates still need a nonempty range
    span = np.where(span > 0, span, np.maximum(np.abs(lo), 1.0))
    lo = lo - margin * span
    hi = hi + margin * span
    return np.linspace(lo, hi, n_bins + 1, axis=1)


def build_histogram(traj, edges) -> HistogramSignature:
    """Histogram each coordinate on its edges; out-of-range samples go to the end bins."""
    X = check_trajectory(traj, name="traj")
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 2 or edges.shape[0] != X.shape[1] or edges.shape[1] < 2:
        raise ValueError(f"edges of shape {edges.shape} do not fit {X.shape[1]} coordinates")
    if not np.all(np.diff(edges, axis=1) > 0):
        raise ValueError("bin edges must be strictly increasing")
    n_bins = edges.shape[1] - 1
    counts = np.empty((X.shape[1], n_bins))
    for i in range(X.shape[1]):
        # bin b holds edges[b] <= v < edges[b+1]; the last bin also takes v == edges[-1]
        idx = np.searchsorted(edges[i], X[:, i], side="right") - 1
        np.clip(idx, 0, n_bins - 1, out=idx)
        counts[i] = np.bincount(idx, minlength=n_bins) / len(X)
    return HistogramSignature(edges, counts)


def histogram_l2(a: HistogramSignature, b: HistogramSignature) -> float:
    """Sum over coordinates and bins of squared frequency differences."""
    if a.edges.shape != b.edges.shape or not np.array_equal(a.edges, b.edges):
        raise ValueError("histogram signatures use different bin edges")
    diff = a.counts - b.counts
    return float(np.sum(diff * diff))


def normalize_score(raw_error: float, reference_error: float) -> float:
    """Map an error onto [-100, 100]: 100 when perfect, -100 at or beyond the reference."""
    if not reference_error > 0:
        raise ValueError(f"reference_error must be positive, got {reference_error}")
    if raw_error < 0:
        raise ValueError(f"raw_error must be nonnegative, got {raw_error}")
    return 100.0 * (1.0 - 2.0 * min(raw_error / reference_error, 1.0))


@dataclass
class EvalReport:
    eval_id: str
    pair_id: int
    metric: str
    raw_error: float
    reference_error: float
    normalized_score: float
    metadata: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0

    def __post_init__(self):
        if self.metric not in METRIC_KINDS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if not self.raw_error >= 0:
            raise ValueError(f"raw_error must be nonnegative, got {self.raw_error}")
        if not -100.0 <= self.normalized_score <= 100.0:
            raise ValueError(f"normalized_score out of range: {self.normalized_score}")

    def to_dict(self) -> dict:
        return {
            "eval_id": self.eval_id,
            "pair": self.pair_id,
            "metric": self.metric,
            "raw_error": self.raw_error,
            "reference_error": self.reference_error,
            "normalized_score": self.normalized_score,
            "metadata": self.metadata,
        }
