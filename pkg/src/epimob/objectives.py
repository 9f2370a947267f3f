"""Dual-objective indices, entropy weighting, rewards, and fit metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvariantError

__all__ = [
    "RestrictionLedger",
    "ObjectiveWeights",
    "restricted_fraction",
    "update_ledger",
    "strain_index",
    "loss_index",
    "entropy_weights",
    "reward",
    "pareto_distance",
    "r_squared",
]


@dataclass(frozen=True)
class RestrictionLedger:
    """Accumulated mobility-restriction loss with geometric decay."""

    loss: float = 0.0
    lam: float = 0.99

    def __post_init__(self) -> None:
        if not self.loss >= 0:
            raise InvariantError(f"loss: must be >= 0, got {self.loss!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvariantError(f"lambda: must be in [0, 1], got {self.lam!r}")


def restricted_fraction(demand_row: np.ndarray, actual_row: np.ndarray,
                        demand_mean: float) -> float:
    """Restricted demand of one division, in units of its mean demand."""
    if demand_mean <= 0:
        return 0.0
    diff = float(np.sum(np.asarray(demand_row) - np.asarray(actual_row)))
    return diff / demand_mean


def update_ledger(ledger: RestrictionLedger, demand_row: np.ndarray,
                  actual_row: np.ndarray, demand_mean: float) -> RestrictionLedger:
    """Fold one day's restriction into the ledger: L' = lam * (L + f)."""
    f = restricted_fraction(demand_row, actual_row, demand_mean)
    return RestrictionLedger(loss=ledger.lam * (ledger.loss + f), lam=ledger.lam)


def strain_index(h: float, k_i: float, h0: float) -> float:
    """Hospital capacity strain, exponential in the hospitalized count."""
    if h < 0:
        raise InvariantError(f"h: must be >= 0, got {h!r}")
    if h0 <= 0:
        raise InvariantError(f"h0: must be > 0, got {h0!r}")
    return k_i * float(np.exp(h / h0))


def loss_index(loss: float, l0: float, demand_row: np.ndarray,
               actual_row: np.ndarray, demand_mean: float) -> float:
    """Current-day restriction cost amplified by the accumulated ledger."""
    if l0 <= 0:
        raise InvariantError(f"l0: must be > 0, got {l0!r}")
    f = restricted_fraction(demand_row, actual_row, demand_mean)
    return float(np.exp(loss / l0)) * f


@dataclass(frozen=True)
class ObjectiveWeights:
    """Trade-off weights of the strain and loss objectives; sum to one."""

    w_c: float = 0.5
    w_r: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 <= self.w_c <= 1.0 and 0.0 <= self.w_r <= 1.0):
            raise InvariantError(
                f"weights: must lie in [0, 1], got ({self.w_c!r}, {self.w_r!r})")
        if abs(self.w_c + self.w_r - 1.0) > 1e-12:
            raise InvariantError(
                f"weights: must sum to 1, got {self.w_c + self.w_r!r}")


def _series_entropy(series: np.ndarray) -> float:
    """Entropy of a T x K objective series, after negative-indicator
    min-max inversion pooled over the window and per-day averaging."""
    t_len = series.shape[0]
    lo, hi = series.min(), series.max()
    if hi - lo <= 0:
        normalized = np.ones_like(series)
    else:
        normalized = (hi - series) / (hi - lo)
    per_day = normalized.mean(axis=1)
    total = per_day.sum()
    if total <= 0:
        return 1.0
    p = per_day / total
    mask = p > 0
    return float(-(p[mask] * np.log(p[mask])).sum() / np.log(t_len))


def entropy_weights(c_series: np.ndarray, r_series: np.ndarray) -> ObjectiveWeights:
    """Entropy-method weights from T x K histories of both objectives.

    The objective whose series carries higher information entropy (more
    uniform variation) receives the smaller weight. Constant series have
    entropy one and weight numerator zero; if both degenerate, the split
    is even.
    """
    c_series = np.atleast_2d(np.asarray(c_series, dtype=np.float64))
    r_series = np.atleast_2d(np.asarray(r_series, dtype=np.float64))
    if c_series.shape != r_series.shape:
        raise InvariantError(
            f"series: shape mismatch {c_series.shape} vs {r_series.shape}")
    if c_series.shape[0] < 2:
        raise InvariantError(
            f"series: need at least 2 days, got {c_series.shape[0]}")
    if np.any(c_series < 0) or np.any(r_series < 0):
        raise InvariantError("series: entries must be >= 0")
    h_c = _series_entropy(c_series)
    h_r = _series_entropy(r_series)
    num_c = 1.0 - h_c
    num_r = 1.0 - h_r
    denom = num_c + num_r
    if abs(denom) < 1e-15:
        return ObjectiveWeights(0.5, 0.5)
    w_c = num_c / denom
    w_c = min(max(w_c, 0.0), 1.0)
    return ObjectiveWeights(w_c=w_c, w_r=1.0 - w_c)


def reward(c: float, r: float, weights: ObjectiveWeights) -> float:
    """Negative weighted sum of the two indices; never positive."""
    return -(weights.w_c * c + weights.w_r * r)


def pareto_distance(c: float, r: float, c_min: float, c_max: float,
                    r_min: float, r_max: float) -> float:
    """Euclidean distance to the ideal point after min-max normalization."""
    if not (c_max > c_min and r_max > r_min):
        raise InvariantError(
            f"bounds: degenerate, c [{c_min}, {c_max}], r [{r_min}, {r_max}]")
    c_hat = (c - c_min) / (c_max - c_min)
    r_hat = (r - r_min) / (r_max - r_min)
    return float(np.hypot(c_hat, r_hat))


def r_squared(actual: np.ndarray, estimated: np.ndarray) -> float:
    """Goodness of fit 1 - SSE/SST of an estimated series."""
    actual = np.asarray(actual, dtype=np.float64)
    estimated = np.asarray(estimated, dtype=np.float64)
    if actual.shape != estimated.shape or actual.ndim != 1:
        raise InvariantError(
            f"series: need equal-length 1-d series, got {actual.shape} vs {estimated.shape}")
    if len(actual) < 2:
        raise InvariantError(f"series: need length >= 2, got {len(actual)}")
    sst = float(np.sum((actual - actual.mean()) ** 2))
    if sst <= 0:
        raise InvariantError("actual: series is constant, R^2 undefined")
    sse = float(np.sum((actual - estimated) ** 2))
    return 1.0 - sse / sst
