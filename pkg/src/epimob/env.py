"""The dual-objective control environment over the city simulator.

One agent per division chooses a quota row each day; the environment
applies quotas to demand, moves people, advances the disease, refreshes
per-division infection rates from the online R_t estimate, and scores
hospital strain against restriction loss.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel, rt
from .core import CsvOdSource, GravityOdSource, Scenario, scenario_hash, seeded_rng
from .epidemic import inflow_betas, step_city
from .mobility import MobilityMatrix, QuotaMatrix, apply_quota, read_od_csv, synth_gravity_od
from .objectives import (ObjectiveWeights, loss_index, restricted_fraction,
                         reward, strain_index)

__all__ = [
    "AgentObservation",
    "StepOutcome",
    "Transition",
    "DemandProvider",
    "demand_from_scenario",
    "Environment",
    "EpisodeTrace",
    "run_episode",
    "DivisionView",
]

OBS_DIM = 11

SUCCESS = "success"
TIMEOUT = "timeout"
HOSPITAL_BREACH = "hospital-breach"
LOCKDOWN_BREACH = "lockdown-breach"
MAX_STEPS = "max-steps"

BREACH_FRACTION = 0.2


@dataclass(frozen=True)
class AgentObservation:
    """Local view of one agent: own division plus its demand level."""

    position_code: int
    state: np.ndarray
    delta_state: np.ndarray
    loss: float
    mean_demand: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate([
            [float(self.position_code)], self.state, self.delta_state,
            [self.loss, self.mean_demand]])


@dataclass(frozen=True)
class DivisionView:
    """Aggregates heuristic policies read: cases, capacity, loss."""

    new_cases: float
    week_cases: float
    population: float
    hospitalized: float
    loss: float


@dataclass
class StepOutcome:
    observations: list[AgentObservation]
    rewards: np.ndarray
    terminated: bool
    reason: str | None
    info: dict


@dataclass
class Transition:
    obs: np.ndarray        # (K, OBS_DIM)
    action: np.ndarray     # (K, K)
    rewards: np.ndarray    # (K,)
    next_obs: np.ndarray   # (K, OBS_DIM)
    done: bool


class DemandProvider:
    """Daily demand matrices, cycling week-periodically past the data."""

    def __init__(self, matrices: list[MobilityMatrix]):
        if not matrices:
            raise ValueError("need at least one demand matrix")
        self._flows = [m.flows for m in matrices]
        n = len(matrices)
        self.period = 7 * (n // 7) if n >= 7 else n

    def flows_for_day(self, day: int) -> np.ndarray:
        return self._flows[day % self.period]


def demand_from_scenario(scenario: Scenario) -> DemandProvider:
    source = scenario.od_source
    if isinstance(source, CsvOdSource):
        matrices = read_od_csv(source.path, k=scenario.k)
        if not matrices:
            raise ValueError(f"od_source: no demand rows in {source.path}")
        return DemandProvider(matrices)
    assert isinstance(source, GravityOdSource)
    rng = seeded_rng(scenario.seed, "od") if source.noise_sigma > 0 else None
    pops = scenario.populations()
    dist = np.asarray(source.distances_km)
    matrices = [
        synth_gravity_od(pops, dist, source.trip_rate, source.exponent,
                         rng=rng, noise_sigma=source.noise_sigma, day=d)
        for d in range(source.days)
    ]
    return DemandProvider(matrices)


class Environment:
    """Sequentially stepped, single-owner MDP over one scenario."""

    def __init__(self, scenario: Scenario, seed: int,
                 weights: ObjectiveWeights | None = None,
                 demand: DemandProvider | None = None):
        self.scenario = scenario
        self.seed = seed
        self.weights = weights if weights is not None else ObjectiveWeights()
        self.si = rt.SerialInterval.from_disease(scenario.disease)
        self._si_weights = np.array(
            [rt.si_weight(d, self.si) for d in range(self.si.max_days + 1)])
        self.refresh_lag = rt.refresh_lag(self.si)
        self.demand = demand if demand is not None else demand_from_scenario(scenario)
        self.k = scenario.k
        self._pop0 = scenario.populations()
        self._h_thresholds = scenario.hospital_thresholds()
        self.reset()

    def reset(self) -> list[AgentObservation]:
        sc = self.scenario
        self.day = 0
        self.states = sc.initial_states()
        self.prev_states = self.states.copy()
        self.losses = np.zeros(self.k)
        self.betas = np.full(self.k, sc.disease.beta0)
        self._incidence_rows: list[np.ndarray] = []
        self.terminated = False
        self.reason: str | None = None
        return self.observe()

    def observe(self) -> list[AgentObservation]:
        demand = self.demand.flows_for_day(self.day)
        mean_demand = self._row_means(demand)
        delta = self.states - self.prev_states
        return [
            AgentObservation(position_code=i,
                             state=self.states[i].copy(),
                             delta_state=delta[i].copy(),
                             loss=float(self.losses[i]),
                             mean_demand=float(mean_demand[i]))
            for i in range(self.k)
        ]

    def views(self) -> list[DivisionView]:
        if self._incidence_rows:
            last = self._incidence_rows[-1]
            window = np.sum(self._incidence_rows[-7:], axis=0)
        else:
            last = np.zeros(self.k)
            window = np.zeros(self.k)
        pops = self.states.sum(axis=1)
        return [
            DivisionView(new_cases=float(last[i]), week_cases=float(window[i]),
                         population=float(pops[i]),
                         hospitalized=float(self.states[i, 2]),
                         loss=float(self.losses[i]))
            for i in range(self.k)
        ]

    @staticmethod
    def _row_means(flows: np.ndarray) -> np.ndarray:
        off = flows.copy()
        np.fill_diagonal(off, 0.0)
        return off.sum(axis=1) / flows.shape[0]

    def _refresh_betas(self) -> None:
        counts_matrix = np.stack(self._incidence_rows)
        now = counts_matrix.shape[0] - 1
        # estimates fresher than the reference lag are dominated by
        # still-unobserved onward infections; hold the current rate until
        # enough forward data exists
        t_ref = now - self.refresh_lag
        if t_ref < 0:
            return
        period = self.scenario.disease.effective_infectious_period
        for i in range(self.k):
            counts = np.ascontiguousarray(counts_matrix[:, i])
            if not np.any(counts[: t_ref + 1] > 0):
                continue  # nothing observed yet; keep the current rate
            e = _accel.onward_expectation(counts, self._si_weights)
            t_star = t_ref
            while counts[t_star] <= 0:
                t_star -= 1
            corrected = e[t_star] * rt.censor_factor(now - t_star, self.si)
            self.betas[i] = min(rt.beta_from_rt(float(corrected), period), 1.0)

    def step(self, action) -> StepOutcome:
        if self.terminated:
            raise RuntimeError(f"environment already terminated ({self.reason})")
        if isinstance(action, QuotaMatrix):
            quota = QuotaMatrix(day=self.day, quotas=action.quotas)
        else:
            quota = QuotaMatrix(day=self.day, quotas=np.asarray(action, dtype=np.float64))
        demand_flows = self.demand.flows_for_day(self.day)
        demand = MobilityMatrix(day=self.day, flows=demand_flows)
        actual = apply_quota(demand, quota)

        betas_in = inflow_betas(actual.flows, self.betas)
        result = step_city(self.states, actual, self.betas, betas_in,
                           self.scenario.disease)
        self.prev_states = self.states
        self.states = result.states
        self._incidence_rows.append(result.new_infections.copy())
        self._refresh_betas()

        mean_demand = self._row_means(demand_flows)
        obj = self.scenario.objectives
        cs = np.empty(self.k)
        rs = np.empty(self.k)
        rewards = np.empty(self.k)
        actual_off = actual.flows.copy()
        np.fill_diagonal(actual_off, 0.0)
        demand_off = demand_flows.copy()
        np.fill_diagonal(demand_off, 0.0)
        for i in range(self.k):
            f = restricted_fraction(demand_off[i], actual_off[i], mean_demand[i])
            cs[i] = strain_index(float(self.states[i, 2]), obj.k_i, obj.h0)
            rs[i] = loss_index(float(self.losses[i]), obj.l0, demand_off[i],
                               actual_off[i], mean_demand[i])
            self.losses[i] = obj.lam * (self.losses[i] + f)
            rewards[i] = reward(cs[i], rs[i], self.weights)

        self.day += 1
        reason = None
        new_inf = result.new_infections
        control = self.scenario.control
        if np.all(new_inf < 1.0):
            reason = SUCCESS
        elif np.count_nonzero(self.states[:, 2] > self._h_thresholds) > BREACH_FRACTION * self.k:
            reason = HOSPITAL_BREACH
        elif np.count_nonzero(self.losses > control.lockdown_threshold) > BREACH_FRACTION * self.k:
            reason = LOCKDOWN_BREACH
        elif self.day >= self.scenario.horizon:
            reason = TIMEOUT
        if reason in (HOSPITAL_BREACH, LOCKDOWN_BREACH):
            rewards -= control.breach_penalty
        if reason is not None:
            self.terminated = True
            self.reason = reason

        info = {
            "c": cs, "r": rs, "new_infections": new_inf,
            "quota_mean": float(quota.quotas.mean()),
            "betas": self.betas.copy(),
            "row_scale": result.row_scale, "delta_scale": result.delta_scale,
        }
        return StepOutcome(observations=self.observe(), rewards=rewards,
                           terminated=self.terminated, reason=reason, info=info)


@dataclass
class EpisodeTrace:
    """Everything recorded while rolling one episode."""

    scenario_hash: str
    seed: int
    policy_id: str
    reason: str
    tts: int | None
    states: np.ndarray          # (T, K, 4) post-step states
    actions: np.ndarray         # (T, K, K)
    rewards: np.ndarray         # (T, K)
    new_infections: np.ndarray  # (T, K)
    c: np.ndarray               # (T, K)
    r: np.ndarray               # (T, K)
    losses: np.ndarray          # (T, K)
    transitions: list[Transition] = field(default_factory=list)

    @property
    def days(self) -> int:
        return self.states.shape[0]

    @property
    def k(self) -> int:
        return self.states.shape[1]

    def metrics(self) -> dict:
        quota_means = self.actions.mean(axis=(1, 2))
        return {
            "H_bar": float(self.states[:, :, 2].mean()),
            "Q_bar": float(quota_means.mean()),
            "TTS": self.tts,
            "c_bar": float(self.c.mean()),
            "r_bar": float(self.r.mean()),
            "mean_return": float(self.rewards.mean(axis=1).sum()),
        }

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["day", "division", "S", "I", "H", "R",
                             "new_infections", "c", "r", "loss", "reward",
                             "quota_row_mean"])
            for t in range(self.days):
                for i in range(self.k):
                    writer.writerow([
                        t + 1, i,
                        repr(self.states[t, i, 0]), repr(self.states[t, i, 1]),
                        repr(self.states[t, i, 2]), repr(self.states[t, i, 3]),
                        repr(self.new_infections[t, i]),
                        repr(self.c[t, i]), repr(self.r[t, i]),
                        repr(self.losses[t, i]), repr(self.rewards[t, i]),
                        repr(float(self.actions[t, i].mean())),
                    ])
        meta = {
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "policy_id": self.policy_id,
            "termination_reason": self.reason,
            "tts": self.tts,
            "days": self.days,
        }
        (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def run_episode(policy, scenario: Scenario, seed: int, max_steps: int = 300,
                weights: ObjectiveWeights | None = None,
                env: Environment | None = None) -> EpisodeTrace:
    """Roll one full episode of a policy against a scenario."""
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    if env is None:
        env = Environment(scenario, seed, weights=weights)
    observations = env.reset()
    if weights is not None:
        env.weights = weights
    policy.reset(scenario)
    rng = seeded_rng(seed, f"policy-{policy.policy_id}")
    states, actions, rewards = [], [], []
    infections, cs, rs, losses = [], [], [], []
    transitions = []
    reason = MAX_STEPS
    tts = None
    for _ in range(max_steps):
        obs_mat = np.stack([o.as_vector() for o in observations])
        action = policy.act(env.day, env.views(), observations, rng)
        outcome = env.step(action)
        next_mat = np.stack([o.as_vector() for o in outcome.observations])
        transitions.append(Transition(obs=obs_mat, action=np.asarray(action, dtype=np.float64),
                                      rewards=outcome.rewards.copy(),
                                      next_obs=next_mat, done=outcome.terminated))
        states.append(env.states.copy())
        actions.append(np.asarray(action, dtype=np.float64).copy())
        rewards.append(outcome.rewards.copy())
        infections.append(outcome.info["new_infections"].copy())
        cs.append(outcome.info["c"].copy())
        rs.append(outcome.info["r"].copy())
        losses.append(env.losses.copy())
        observations = outcome.observations
        if outcome.terminated:
            reason = outcome.reason
            if reason == SUCCESS:
                tts = env.day
            break
    return EpisodeTrace(
        scenario_hash=scenario_hash(scenario), seed=seed,
        policy_id=policy.policy_id, reason=reason, tts=tts,
        states=np.stack(states), actions=np.stack(actions),
        rewards=np.stack(rewards), new_infections=np.stack(infections),
        c=np.stack(cs), r=np.stack(rs), losses=np.stack(losses),
        transitions=transitions)
