"""Time-varying reproduction number estimation from daily incidence.

The estimator attributes each day's new infections to candidate infector
days weighted by a truncated Gamma serial-interval density, sums expected
onward infections per infection day, and inflates recent days for right
censoring. All per-day aggregation is an exact algebraic regrouping of
the person-level attribution, which the test suite checks by brute-force
enumeration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import _accel

__all__ = [
    "SerialInterval",
    "IncidenceSeries",
    "RtEstimate",
    "default_max_days",
    "si_weight",
    "censor_factor",
    "attribution_prob",
    "estimate_rt",
    "beta_from_rt",
    "refresh_lag",
]

_MAX_SEARCH_DAYS = 10_000


def _gamma_cdf(x: float, shape: float, scale: float) -> float:
    if x <= 0:
        return 0.0
    return float(special.gammainc(shape, x / scale))


def _gamma_pdf(x: float, shape: float, scale: float) -> float:
    if x <= 0:
        return 0.0
    log_pdf = ((shape - 1.0) * np.log(x) - x / scale
               - special.gammaln(shape) - shape * np.log(scale))
    return float(np.exp(log_pdf))


def default_max_days(shape: float, scale: float) -> int:
    """Smallest integer horizon holding at least 99% of the SI mass."""
    for d in range(1, _MAX_SEARCH_DAYS + 1):
        if _gamma_cdf(d, shape, scale) >= 0.99:
            return d
    raise ValueError("serial interval too dispersed: CDF < 0.99 even at "
                     f"{_MAX_SEARCH_DAYS} days")


@dataclass(frozen=True)
class SerialInterval:
    """Gamma-distributed serial interval truncated at ``max_days``."""

    shape: float
    scale: float
    max_days: int

    def __post_init__(self) -> None:
        from .core import InvariantError

        if not self.shape > 0:
            raise InvariantError(f"shape: must be > 0, got {self.shape!r}")
        if not self.scale > 0:
            raise InvariantError(f"scale: must be > 0, got {self.scale!r}")
        if self.max_days < 1:
            raise InvariantError(f"max_days: must be >= 1, got {self.max_days!r}")
        if _gamma_cdf(self.max_days, self.shape, self.scale) < 0.99:
            raise InvariantError(
                f"max_days: Gamma CDF at {self.max_days} is "
                f"{_gamma_cdf(self.max_days, self.shape, self.scale):.4f} < 0.99")

    @classmethod
    def from_mean_sd(cls, mean: float, sd: float,
                     max_days: int | None = None) -> "SerialInterval":
        from .core import InvariantError

        if not mean > 0:
            raise InvariantError(f"si_mean: must be > 0, got {mean!r}")
        if not sd > 0:
            raise InvariantError(f"si_sd: must be > 0, got {sd!r}")
        shape = (mean / sd) ** 2
        scale = sd * sd / mean
        if max_days is None:
            max_days = default_max_days(shape, scale)
        return cls(shape=shape, scale=scale, max_days=max_days)

    @classmethod
    def from_disease(cls, disease) -> "SerialInterval":
        return cls.from_mean_sd(disease.si_mean, disease.si_sd, disease.si_max)

    @property
    def mean(self) -> float:
        return self.shape * self.scale


@lru_cache(maxsize=64)
def _weight_table(shape: float, scale: float, max_days: int) -> np.ndarray:
    # lag 0 uses the density at half a day (midpoint convention)
    w = np.empty(max_days + 1)
    w[0] = _gamma_pdf(0.5, shape, scale)
    for d in range(1, max_days + 1):
        w[d] = _gamma_pdf(float(d), shape, scale)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _censor_table(shape: float, scale: float, max_days: int) -> np.ndarray:
    # factor(lag) = 1 + (1 - F(lag)); F treated as 1 beyond truncation
    f = np.array([_gamma_cdf(float(d), shape, scale) for d in range(max_days + 1)])
    factors = 2.0 - f
    factors.setflags(write=False)
    return factors


def si_weight(lag: int, si: SerialInterval) -> float:
    """Serial-interval weight at an integer lag; zero beyond truncation."""
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    if lag > si.max_days:
        return 0.0
    return float(_weight_table(si.shape, si.scale, si.max_days)[lag])


def censor_factor(lag: int, si: SerialInterval) -> float:
    """Right-censoring inflation 1 + (1 - F(lag)), clipped to 1 at truncation."""
    if lag >= si.max_days:
        return 1.0
    return float(_censor_table(si.shape, si.scale, si.max_days)[max(lag, 0)])


@dataclass(frozen=True)
class IncidenceSeries:
    """Daily new-infection counts, day 0 .. T (real-valued, >= 0)."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        from .core import InvariantError

        arr = np.asarray(self.counts, dtype=np.float64)
        if arr.ndim != 1:
            raise InvariantError(f"counts: must be 1-d, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvariantError("counts: must be finite")
        if np.any(arr < 0):
            raise InvariantError("counts: must be >= 0")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    def __len__(self) -> int:
        return len(self.counts)


def _as_counts(incidence) -> np.ndarray:
    if isinstance(incidence, IncidenceSeries):
        return incidence.counts
    return IncidenceSeries(np.asarray(incidence, dtype=np.float64)).counts


def attribution_prob(t_u: int, t_v: int, incidence, si: SerialInterval) -> float:
    """Probability that a day-``t_v`` infection traces back to day ``t_u``.

    Day-aggregated form: the SI weight of the lag, normalized over all
    candidate infector days in the window [t_v - max_days, t_v].
    """
    counts = _as_counts(incidence)
    t_last = len(counts) - 1
    if not 0 <= t_u <= t_v <= t_last:
        raise ValueError(f"need 0 <= t_u <= t_v <= {t_last}, got ({t_u}, {t_v})")
    if t_v - t_u > si.max_days:
        raise ValueError(f"lag {t_v - t_u} exceeds max_days {si.max_days}")
    weights = _weight_table(si.shape, si.scale, si.max_days)
    denom = 0.0
    for w_day in range(max(0, t_v - si.max_days), t_v + 1):
        denom += counts[w_day] * weights[t_v - w_day]
    if denom <= 0:
        return 0.0
    return float(weights[t_v - t_u] / denom)


@dataclass(frozen=True)
class RtEstimate:
    """Per-day raw and censoring-corrected reproduction numbers.

    Days without an estimate of their own (zero incidence) carry the
    previous day's values and are flagged in ``imputed``; leading days
    before the first case are NaN.
    """

    raw: np.ndarray
    corrected: np.ndarray
    imputed: np.ndarray

    def __len__(self) -> int:
        return len(self.raw)


def estimate_rt(incidence, si: SerialInterval, now: int | None = None) -> RtEstimate:
    """Estimate R_t for each day of an incidence series.

    ``now`` is the observation day T; it defaults to the last day of the
    series and must not precede it (censoring depends on T - t).
    """
    counts = _as_counts(incidence)
    t_last = len(counts) - 1
    if now is None:
        now = t_last
    if now < t_last:
        raise ValueError(f"now={now} precedes the last incidence day {t_last}")
    if len(counts) == 0 or not np.any(counts > 0):
        warnings.warn("all-zero incidence: nothing to estimate", stacklevel=2)
        empty = np.array([])
        return RtEstimate(raw=empty, corrected=empty,
                          imputed=np.array([], dtype=bool))

    weights = _weight_table(si.shape, si.scale, si.max_days)
    e = _accel.onward_expectation(counts, np.asarray(weights))

    factors = _censor_table(si.shape, si.scale, si.max_days)
    raw = np.full(len(counts), np.nan)
    corrected = np.full(len(counts), np.nan)
    imputed = np.ones(len(counts), dtype=bool)
    for t in range(len(counts)):
        if counts[t] > 0:
            lag = now - t
            raw[t] = e[t]
            corrected[t] = e[t] * (factors[lag] if lag < si.max_days else 1.0)
            imputed[t] = False
        elif t > 0 and not np.isnan(raw[t - 1]):
            raw[t] = raw[t - 1]
            corrected[t] = corrected[t - 1]
    return RtEstimate(raw=raw, corrected=corrected, imputed=imputed)


def beta_from_rt(rt_value: float, period: float) -> float:
    """Daily infection rate implied by a reproduction number."""
    if period <= 0:
        raise ValueError(f"period must be > 0, got {period}")
    if rt_value < 0:
        raise ValueError(f"rt must be >= 0, got {rt_value}")
    return rt_value / period


def refresh_lag(si: SerialInterval, completeness: float = 0.8) -> int:
    """Smallest lag at which the SI CDF reaches ``completeness``.

    Online control reads its R_t at this trailing offset: estimates
    nearer to the present are dominated by unobserved onward infections
    that the censoring correction only partially restores.
    """
    for d in range(1, si.max_days + 1):
        if _gamma_cdf(d, si.shape, si.scale) >= completeness:
            return d
    return si.max_days
