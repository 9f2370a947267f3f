"""Ring replay buffers for joint transitions, with dual-source sampling."""

from __future__ import annotations

import numpy as np

from ..env import Transition

__all__ = ["ReplayBuffer", "sample_dual"]


class ReplayBuffer:
    """Fixed-capacity FIFO store of joint (s, a, r, s', done) tuples."""

    def __init__(self, capacity: int, k: int, obs_dim: int, source: str = "agent"):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.source = source
        self.obs = np.zeros((capacity, k, obs_dim))
        self.act = np.zeros((capacity, k, k))
        self.rew = np.zeros((capacity, k))
        self.next_obs = np.zeros((capacity, k, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def add(self, transition: Transition) -> None:
        idx = self._head
        self.obs[idx] = transition.obs
        self.act[idx] = transition.action
        self.rew[idx] = transition.rewards
        self.next_obs[idx] = transition.next_obs
        self.done[idx] = transition.done
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def gather(self, indices: np.ndarray) -> dict[str, np.ndarray]:
        return {
            "obs": self.obs[indices],
            "act": self.act[indices],
            "rew": self.rew[indices],
            "next_obs": self.next_obs[indices],
            "done": self.done[indices],
        }

    def sample(self, rng: np.random.Generator, batch: int) -> dict[str, np.ndarray]:
        if self._size == 0:
            raise RuntimeError("cannot sample from an empty buffer")
        indices = rng.integers(0, self._size, size=batch)
        return self.gather(indices)


def sample_dual(agent_buf: ReplayBuffer, expert_buf: ReplayBuffer, batch: int,
                rho: float, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Draw a batch with expected fraction ``rho`` from the expert buffer.

    The expert count is floor(rho * batch) plus one Bernoulli item for the
    fractional remainder, so the expectation is honored exactly. A source
    with no data cedes its share to the other.
    """
    if len(expert_buf) == 0 or rho <= 0:
        out = agent_buf.sample(rng, batch)
        out["expert_mask"] = np.zeros(batch, dtype=bool)
        return out
    if len(agent_buf) == 0 or rho >= 1:
        out = expert_buf.sample(rng, batch)
        out["expert_mask"] = np.ones(batch, dtype=bool)
        return out
    n_expert = int(np.floor(rho * batch))
    frac = rho * batch - n_expert
    if frac > 0 and rng.random() < frac:
        n_expert += 1
    n_expert = min(max(n_expert, 0), batch)
    part_expert = expert_buf.sample(rng, n_expert) if n_expert else None
    part_agent = agent_buf.sample(rng, batch - n_expert) if batch - n_expert else None
    if part_expert is None:
        out = part_agent
        mask = np.zeros(batch, dtype=bool)
    elif part_agent is None:
        out = part_expert
        mask = np.ones(batch, dtype=bool)
    else:
        out = {key: np.concatenate([part_expert[key], part_agent[key]])
               for key in part_expert}
        mask = np.concatenate([np.ones(n_expert, dtype=bool),
                               np.zeros(batch - n_expert, dtype=bool)])
    out["expert_mask"] = mask
    return out
