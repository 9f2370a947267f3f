"""Multi-agent deterministic-policy-gradient training with a shared critic
and dual (agent + expert) experience replay."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import InvariantError, Scenario, seeded_rng
from ..env import OBS_DIM, Environment, Transition, run_episode
from ..objectives import ObjectiveWeights, entropy_weights
from .buffer import ReplayBuffer, sample_dual
from .heuristic import ExpertPolicy, Policy
from .nets import MLP, Adam, soft_update

__all__ = [
    "TrainConfig",
    "ObsScaler",
    "LearnedPolicy",
    "TrainResult",
    "train",
    "rho_at",
    "save_policy",
    "load_policy",
]

POLICY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the actor-critic trainer."""

    episodes: int = 500
    lr: float = 1e-4
    eta: float = 0.9
    tau: float = 0.01
    rho0: float = 0.5
    rho_decay: float = 0.1
    rho_every: int = 200
    batch_size: int = 64
    capacity: int = 100_000
    expert_prefill_episodes: int = 20
    noise_start: float = 0.2
    noise_end: float = 0.01
    actor_hidden: int = 64
    critic_hidden: int = 128
    max_steps: int = 300
    use_ewm: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise InvariantError(f"eta: must be in [0, 1], got {self.eta!r}")
        if not 0.0 < self.tau <= 1.0:
            raise InvariantError(f"tau: must be in (0, 1], got {self.tau!r}")
        if not 0.0 <= self.rho0 <= 1.0:
            raise InvariantError(f"rho0: must be in [0, 1], got {self.rho0!r}")
        if self.lr <= 0:
            raise InvariantError(f"lr: must be > 0, got {self.lr!r}")
        if self.episodes < 1:
            raise InvariantError(f"episodes: must be >= 1, got {self.episodes!r}")


def rho_at(step: int, config: TrainConfig) -> float:
    """Expert-sampling ratio after ``step`` gradient updates."""
    return max(0.0, config.rho0 - config.rho_decay * (step // config.rho_every))


class ObsScaler:
    """Fixed per-division normalization of raw observation vectors."""

    def __init__(self, k: int, populations: np.ndarray, loss_scale: float):
        self.k = k
        self.populations = np.asarray(populations, dtype=np.float64)
        self.loss_scale = float(loss_scale)

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ObsScaler":
        return cls(scenario.k, scenario.populations(),
                   scenario.control.lockdown_threshold)

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        """Scale (..., K, OBS_DIM) raw observations to O(1) features."""
        obs = np.asarray(obs, dtype=np.float64)
        out = obs.copy()
        pop = self.populations
        out[..., 0] /= max(self.k - 1, 1)
        out[..., 1:9] /= pop[:, None]
        out[..., 9] /= self.loss_scale
        out[..., 10] /= pop
        return out


class LearnedPolicy(Policy):
    """Deterministic per-agent actors over scaled local observations."""

    policy_id = "learned"

    def __init__(self, actors: list[MLP], scaler: ObsScaler):
        self.actors = actors
        self.scaler = scaler
        self.k = len(actors)

    def reset(self, scenario: Scenario) -> None:
        if scenario.k != self.k:
            raise InvariantError(
                f"policy: trained for K={self.k}, scenario has K={scenario.k}")

    def act(self, day, views, observations, rng) -> np.ndarray:
        obs = np.stack([o.as_vector() for o in observations])
        feats = self.scaler(obs)
        rows = [self.actors[i](feats[i:i + 1])[0] for i in range(self.k)]
        return np.clip(np.stack(rows), 0.0, 1.0)


@dataclass
class TrainResult:
    actors: list[MLP]
    critic: MLP
    scaler: ObsScaler
    curve: list[dict] = field(default_factory=list)
    final_weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)

    def policy(self) -> LearnedPolicy:
        return LearnedPolicy(self.actors, self.scaler)


def _critic_input(feats: np.ndarray, actions: np.ndarray) -> np.ndarray:
    b = feats.shape[0]
    return np.concatenate([feats.reshape(b, -1), actions.reshape(b, -1)], axis=1)


class _Updater:
    """One gradient update over critic and all actors."""

    def __init__(self, actors, critic, scaler, config, k):
        self.actors = actors
        self.actor_targets = [a.copy() for a in actors]
        self.critic = critic
        self.critic_target = critic.copy()
        self.scaler = scaler
        self.config = config
        self.k = k
        self.critic_opt = Adam(critic, config.lr)
        self.actor_opts = [Adam(a, config.lr) for a in actors]
        self.steps = 0

    def update(self, batch: dict[str, np.ndarray]) -> float:
        cfg = self.config
        k = self.k
        feats = self.scaler(batch["obs"])
        next_feats = self.scaler(batch["next_obs"])
        b = feats.shape[0]

        next_actions = np.empty((b, k, k))
        for i in range(k):
            next_actions[:, i, :] = self.actor_targets[i](next_feats[:, i, :])
        q_next = self.critic_target(_critic_input(next_feats, next_actions))[:, 0]
        y = batch["rew"].mean(axis=1) + cfg.eta * (~batch["done"]) * q_next

        q, cache = self.critic.forward(_critic_input(feats, batch["act"]))
        diff = q[:, 0] - y
        loss = float(np.mean(diff ** 2))
        w_grads, b_grads, _ = self.critic.backward(cache, (2.0 / b) * diff[:, None])
        self.critic_opt.step(w_grads, b_grads)

        for i in range(k):
            a_i, actor_cache = self.actors[i].forward(feats[:, i, :])
            actions = batch["act"].copy()
            actions[:, i, :] = a_i
            _, critic_cache = self.critic.forward(_critic_input(feats, actions))
            # ascend Q: minimize -Q, upstream gradient -1/B on each sample
            _, _, grad_in = self.critic.backward(critic_cache,
                                                 np.full((b, 1), -1.0 / b))
            grad_a = grad_in[:, k * OBS_DIM + i * k : k * OBS_DIM + (i + 1) * k]
            aw, ab, _ = self.actors[i].backward(actor_cache, grad_a)
            self.actor_opts[i].step(aw, ab)

        soft_update(self.critic_target, self.critic, cfg.tau)
        for i in range(k):
            soft_update(self.actor_targets[i], self.actors[i], cfg.tau)
        self.steps += 1
        return loss


def train(scenario: Scenario, config: TrainConfig, seed: int,
          env: Environment | None = None) -> TrainResult:
    """Train actors against the scenario and return them with the curve."""
    if env is None:
        env = Environment(scenario, seed)
    k = scenario.k
    scaler = ObsScaler.from_scenario(scenario)
    init_rng = seeded_rng(seed, "net-init")
    actors = [MLP([OBS_DIM, config.actor_hidden, config.actor_hidden, k],
                  head="sigmoid", rng=init_rng) for _ in range(k)]
    critic = MLP([k * OBS_DIM + k * k, config.critic_hidden,
                  config.critic_hidden, 1], head="linear", rng=init_rng)
    updater = _Updater(actors, critic, scaler, config, k)

    agent_buf = ReplayBuffer(config.capacity, k, OBS_DIM, source="agent")
    expert_buf = ReplayBuffer(config.capacity, k, OBS_DIM, source="expert")
    for _ in range(config.expert_prefill_episodes):
        trace = run_episode(ExpertPolicy(), scenario, seed,
                            max_steps=config.max_steps, env=env,
                            weights=ObjectiveWeights())
        for transition in trace.transitions:
            expert_buf.add(transition)

    explore_rng = seeded_rng(seed, "exploration")
    sample_rng = seeded_rng(seed, "replay-sampling")
    curve: list[dict] = []
    weights = ObjectiveWeights()
    prev_c = prev_r = None

    for episode in range(config.episodes):
        if config.use_ewm and prev_c is not None and prev_c.shape[0] >= 2:
            weights = entropy_weights(prev_c, prev_r)
        env.weights = weights
        frac = episode / max(config.episodes - 1, 1)
        sigma = config.noise_start + (config.noise_end - config.noise_start) * frac

        observations = env.reset()
        ep_return = 0.0
        cs, rs = [], []
        for _ in range(config.max_steps):
            obs_mat = np.stack([o.as_vector() for o in observations])
            feats = scaler(obs_mat)
            action = np.empty((k, k))
            for i in range(k):
                action[i] = actors[i](feats[i:i + 1])[0]
            action += explore_rng.normal(0.0, sigma, size=(k, k))
            np.clip(action, 0.0, 1.0, out=action)

            outcome = env.step(action)
            next_mat = np.stack([o.as_vector() for o in outcome.observations])
            agent_buf.add(Transition(obs=obs_mat, action=action,
                                     rewards=outcome.rewards,
                                     next_obs=next_mat, done=outcome.terminated))
            ep_return += float(outcome.rewards.mean())
            cs.append(outcome.info["c"])
            rs.append(outcome.info["r"])
            observations = outcome.observations

            if len(agent_buf) >= config.batch_size:
                rho = rho_at(updater.steps, config)
                batch = sample_dual(agent_buf, expert_buf, config.batch_size,
                                    rho, sample_rng)
                updater.update(batch)
            if outcome.terminated:
                break
        prev_c, prev_r = np.stack(cs), np.stack(rs)
        curve.append({"episode": episode, "mean_return": ep_return,
                      "rho": rho_at(updater.steps, config),
                      "noise_sigma": sigma})
    return TrainResult(actors=actors, critic=critic, scaler=scaler,
                       curve=curve, final_weights=weights)


def save_policy(result: TrainResult, path: str | Path) -> None:
    """Serialize trained parameters with an architecture descriptor."""
    arch = {
        "format_version": POLICY_FORMAT_VERSION,
        "k": len(result.actors),
        "obs_dim": OBS_DIM,
        "actor_sizes": result.actors[0].sizes,
        "critic_sizes": result.critic.sizes,
        "scaler": {
            "k": result.scaler.k,
            "populations": list(result.scaler.populations),
            "loss_scale": result.scaler.loss_scale,
        },
        "final_weights": {"w_c": result.final_weights.w_c,
                          "w_r": result.final_weights.w_r},
    }
    arrays = {"arch_json": np.frombuffer(json.dumps(arch).encode(), dtype=np.uint8)}
    for i, actor in enumerate(result.actors):
        for layer, (w, b) in enumerate(zip(actor.weights, actor.biases)):
            arrays[f"actor{i}_w{layer}"] = w
            arrays[f"actor{i}_b{layer}"] = b
    for layer, (w, b) in enumerate(zip(result.critic.weights, result.critic.biases)):
        arrays[f"critic_w{layer}"] = w
        arrays[f"critic_b{layer}"] = b
    np.savez_compressed(path, **arrays)


def load_policy(path: str | Path) -> LearnedPolicy:
    data = np.load(path)
    arch = json.loads(bytes(data["arch_json"]).decode())
    if arch["format_version"] != POLICY_FORMAT_VERSION:
        raise InvariantError(
            f"format_version: expected {POLICY_FORMAT_VERSION}, "
            f"got {arch['format_version']}")
    k = arch["k"]
    scaler = ObsScaler(arch["scaler"]["k"],
                       np.array(arch["scaler"]["populations"]),
                       arch["scaler"]["loss_scale"])
    actors = []
    for i in range(k):
        actor = MLP.__new__(MLP)
        actor.sizes = list(arch["actor_sizes"])
        actor.head = "sigmoid"
        actor.weights = []
        actor.biases = []
        layer = 0
        while f"actor{i}_w{layer}" in data:
            actor.weights.append(np.array(data[f"actor{i}_w{layer}"]))
            actor.biases.append(np.array(data[f"actor{i}_b{layer}"]))
            layer += 1
        actors.append(actor)
    return LearnedPolicy(actors, scaler)
