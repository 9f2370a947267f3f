"""Daily compartment transitions for the mobility-coupled model and the
single-population reference models used in ablation comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import DiseaseParams, EpidemicState, InvariantError
from .mobility import MobilityMatrix

__all__ = [
    "InflowGroup",
    "DailyDelta",
    "StepResult",
    "dsihr_delta",
    "sir_delta",
    "sihr_delta",
    "inflow_betas",
    "step_city",
    "simulate_single",
    "simulate_sir",
    "simulate_sihr",
]


@dataclass(frozen=True)
class InflowGroup:
    """Arrivals pooled per destination; hospitalized never travel."""

    s: float
    i: float
    r: float
    beta: float

    def __post_init__(self) -> None:
        for name in ("s", "i", "r", "beta"):
            value = getattr(self, name)
            if not value >= 0:
                raise InvariantError(f"{name}: must be >= 0, got {value!r}")

    @property
    def h(self) -> float:
        return 0.0

    @property
    def n(self) -> float:
        return self.s + self.i + self.r


@dataclass(frozen=True)
class DailyDelta:
    """Signed one-day changes of the four compartments; sums to zero."""

    s_new: float
    i_new: float
    h_new: float
    r_new: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s_new, self.i_new, self.h_new, self.r_new])

    def total(self) -> float:
        return self.s_new + self.i_new + self.h_new + self.r_new


_NO_INFLOW = None


def dsihr_delta(resident: EpidemicState, inflow: InflowGroup | None,
                beta_resident: float, params: DiseaseParams) -> DailyDelta:
    """One day of transitions with a distinguishable inflow group.

    New infections arise separately within the resident pool and the
    inflow pool; infected leave at the combined hospitalized +
    self-recovery rate; hospitalized resolve at the cure rate. An empty
    inflow pool contributes nothing.
    """
    s, i, h = resident.s, resident.i, resident.h
    n = resident.n
    inf_res = beta_resident * s * i / n if n > 0 else 0.0
    if inflow is not None and inflow.n > 0:
        inf_in = inflow.beta * inflow.s * inflow.i / inflow.n
        i_plus = inflow.i
    else:
        inf_in = 0.0
        i_plus = 0.0
    i_all = i + i_plus
    return DailyDelta(
        s_new=-inf_in - inf_res,
        i_new=inf_in + inf_res - (params.gamma + params.delta) * i_all,
        h_new=params.gamma * i_all - params.theta * h,
        r_new=params.delta * i_all + params.theta * h,
    )


def sir_delta(state: EpidemicState, beta: float, gamma: float) -> DailyDelta:
    """Classic single-population S-I-R daily transition."""
    n = state.s + state.i + state.r
    inf = beta * state.s * state.i / n if n > 0 else 0.0
    return DailyDelta(s_new=-inf, i_new=inf - gamma * state.i,
                      h_new=0.0, r_new=gamma * state.i)


def sihr_delta(state: EpidemicState, beta: float, hosp_rate: float,
               cure_rate: float, self_recovery_rate: float) -> DailyDelta:
    """Single-population S-I-H-R daily transition with self-recovery."""
    n = state.n
    inf = beta * state.s * state.i / n if n > 0 else 0.0
    return DailyDelta(
        s_new=-inf,
        i_new=inf - (hosp_rate + self_recovery_rate) * state.i,
        h_new=hosp_rate * state.i - cure_rate * state.h,
        r_new=self_recovery_rate * state.i + cure_rate * state.h,
    )


def inflow_betas(flows: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Flow-weighted mean of source divisions' infection rates.

    Divisions with no inflow keep rate zero (their inflow pool is empty,
    so the value never enters the dynamics).
    """
    flows = np.asarray(flows, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    off = flows.copy()
    np.fill_diagonal(off, 0.0)
    mass = off.sum(axis=0)
    mixed = off.T @ betas
    out = np.zeros(len(betas))
    pos = mass > 0
    out[pos] = mixed[pos] / mass[pos]
    return out


@dataclass
class StepResult:
    """Outcome of advancing every division one day."""

    states: np.ndarray
    new_infections: np.ndarray
    row_scale: np.ndarray
    delta_scale: np.ndarray

    @property
    def any_clamped(self) -> bool:
        return bool(np.any(self.row_scale < 1.0) or np.any(self.delta_scale < 1.0))


def step_city(states: np.ndarray, actual: MobilityMatrix, betas: np.ndarray,
              betas_inflow: np.ndarray, params: DiseaseParams) -> StepResult:
    """Advance all divisions one day under an actual-mobility matrix.

    Movement and transitions both act on the day-start states; the inflow
    group stays distinguishable only for the infection terms. Divisions
    whose transitions would overdraw a compartment have their whole delta
    scaled down (recorded in ``delta_scale``) so population is conserved
    exactly.
    """
    states = np.asarray(states, dtype=np.float64)
    k = actual.k
    if states.shape != (k, 4):
        raise InvariantError(f"states: expected shape ({k}, 4), got {states.shape}")
    if len(betas) != k or len(betas_inflow) != k:
        raise InvariantError("betas: length mismatch with division count")
    new_states, new_inf, row_scale, delta_scale = _accel.city_step(
        states, actual.flows, np.asarray(betas), np.asarray(betas_inflow),
        params.gamma, params.theta, params.delta)
    return StepResult(states=new_states, new_infections=new_inf,
                      row_scale=row_scale, delta_scale=delta_scale)


def simulate_single(initial: EpidemicState, betas, params: DiseaseParams,
                    days: int) -> dict[str, np.ndarray]:
    """Run one isolated division forward; ``betas`` is scalar or per-day."""
    betas = np.broadcast_to(np.asarray(betas, dtype=np.float64), (days,))
    state = initial
    hist = np.empty((days + 1, 4))
    hist[0] = state.as_array()
    incidence = np.empty(days)
    for t in range(days):
        delta = dsihr_delta(state, _NO_INFLOW, float(betas[t]), params)
        incidence[t] = betas[t] * state.s * state.i / state.n if state.n > 0 else 0.0
        arr = np.maximum(hist[t] + delta.as_array(), 0.0)
        state = EpidemicState.from_array(arr)
        hist[t + 1] = arr
    return {"states": hist, "incidence": incidence,
            "s": hist[:, 0], "i": hist[:, 1], "h": hist[:, 2], "r": hist[:, 3]}


def simulate_sir(s0: float, i0: float, r0: float, beta: float, gamma: float,
                 days: int) -> dict[str, np.ndarray]:
    state = EpidemicState(s=s0, i=i0, h=0.0, r=r0)
    hist = np.empty((days + 1, 4))
    hist[0] = state.as_array()
    for t in range(days):
        delta = sir_delta(state, beta, gamma)
        arr = np.maximum(hist[t] + delta.as_array(), 0.0)
        state = EpidemicState.from_array(arr)
        hist[t + 1] = arr
    return {"s": hist[:, 0], "i": hist[:, 1], "r": hist[:, 3]}


def simulate_sihr(s0: float, i0: float, h0: float, r0: float, beta: float,
                  hosp_rate: float, cure_rate: float, self_recovery_rate: float,
                  days: int) -> dict[str, np.ndarray]:
    state = EpidemicState(s=s0, i=i0, h=h0, r=r0)
    hist = np.empty((days + 1, 4))
    hist[0] = state.as_array()
    for t in range(days):
        delta = sihr_delta(state, beta, hosp_rate, cure_rate, self_recovery_rate)
        arr = np.maximum(hist[t] + delta.as_array(), 0.0)
        state = EpidemicState.from_array(arr)
        hist[t + 1] = arr
    return {"s": hist[:, 0], "i": hist[:, 1], "h": hist[:, 2], "r": hist[:, 3]}
