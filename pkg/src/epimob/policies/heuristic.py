"""Rule-based restriction policies: no-op, case-count rules, expert."""

from __future__ import annotations

import numpy as np

from ..core import Scenario

__all__ = [
    "Policy",
    "NoPolicy",
    "RandomPolicy",
    "CountThresholdPolicy",
    "MitigationPolicy",
    "SuppressionPolicy",
    "ExpertPolicy",
    "make_policy",
    "HEURISTIC_POLICIES",
]


class Policy:
    """A policy maps per-division views/observations to a KxK quota matrix."""

    policy_id = "base"

    def reset(self, scenario: Scenario) -> None:
        self.k = scenario.k

    def act(self, day, views, observations, rng) -> np.ndarray:
        raise NotImplementedError


class NoPolicy(Policy):
    """Leave all mobility unrestricted."""

    policy_id = "none"

    def act(self, day, views, observations, rng) -> np.ndarray:
        return np.ones((self.k, self.k))


class RandomPolicy(Policy):
    """Uniform random quotas; the exploration floor for comparisons."""

    policy_id = "random"

    def act(self, day, views, observations, rng) -> np.ndarray:
        return rng.uniform(0.0, 1.0, size=(self.k, self.k))


class CountThresholdPolicy(Policy):
    """Hard lockdown to 10% when daily new cases exceed 1 per 1000,
    full release below 3 cases; in between the previous row is held."""

    policy_id = "count-threshold"

    def reset(self, scenario: Scenario) -> None:
        super().reset(scenario)
        self._rows = np.ones(self.k)

    def act(self, day, views, observations, rng) -> np.ndarray:
        for i, view in enumerate(views):
            if view.new_cases > view.population / 1000.0:
                self._rows[i] = 0.10
            elif view.new_cases < 3.0:
                self._rows[i] = 1.00
        return np.repeat(self._rows[:, None], self.k, axis=1)


class MitigationPolicy(Policy):
    """Halve mobility while the 7-day case sum exceeds 1 per 1000."""

    policy_id = "mitigation"

    def act(self, day, views, observations, rng) -> np.ndarray:
        rows = np.ones(self.k)
        for i, view in enumerate(views):
            if view.week_cases > view.population / 1000.0:
                rows[i] = 0.50
        return np.repeat(rows[:, None], self.k, axis=1)


class SuppressionPolicy(Policy):
    """Stage mobility on a per-division clock.

    Divisions with any cases in the trailing week run at 30% for the
    first 7 days after triggering, then 10%. Case-free divisions run at
    50% for 14 days, then 90%. Switching branches resets the clock.
    """

    policy_id = "suppression"

    def reset(self, scenario: Scenario) -> None:
        super().reset(scenario)
        self._infected = np.zeros(self.k, dtype=bool)
        self._clock = np.zeros(self.k, dtype=int)

    def act(self, day, views, observations, rng) -> np.ndarray:
        rows = np.empty(self.k)
        for i, view in enumerate(views):
            infected = view.week_cases >= 1.0
            if infected != self._infected[i]:
                self._infected[i] = infected
                self._clock[i] = 0
            if infected:
                rows[i] = 0.30 if self._clock[i] < 7 else 0.10
            else:
                rows[i] = 0.50 if self._clock[i] < 14 else 0.90
            self._clock[i] += 1
        return np.repeat(rows[:, None], self.k, axis=1)


class ExpertPolicy(Policy):
    """Fully lock down a division while hospitalizations run high and its
    accumulated restriction loss still has headroom."""

    policy_id = "expert"

    def __init__(self, h_threshold: float | None = None,
                 l_threshold: float | None = None):
        self._h_override = h_threshold
        self._l_override = l_threshold

    def reset(self, scenario: Scenario) -> None:
        super().reset(scenario)
        self.h_threshold = (self._h_override if self._h_override is not None
                            else scenario.control.expert_h_threshold)
        self.l_threshold = (self._l_override if self._l_override is not None
                            else scenario.control.expert_l_threshold)

    def act(self, day, views, observations, rng) -> np.ndarray:
        rows = np.ones(self.k)
        for i, view in enumerate(views):
            if view.hospitalized > self.h_threshold and view.loss < self.l_threshold:
                rows[i] = 0.0
        return np.repeat(rows[:, None], self.k, axis=1)


HEURISTIC_POLICIES = {
    "none": NoPolicy,
    "random": RandomPolicy,
    "count-threshold": CountThresholdPolicy,
    "mitigation": MitigationPolicy,
    "suppression": SuppressionPolicy,
    "expert": ExpertPolicy,
}


def make_policy(policy_id: str) -> Policy:
    try:
        return HEURISTIC_POLICIES[policy_id]()
    except KeyError:
        raise ValueError(f"unknown policy id {policy_id!r}; "
                         f"known: {sorted(HEURISTIC_POLICIES)}") from None
