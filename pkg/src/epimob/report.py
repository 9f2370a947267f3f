"""Policy evaluation: seed sweeps, aggregate metrics, Pareto distances."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Scenario
from .env import EpisodeTrace, run_episode
from .objectives import pareto_distance

__all__ = [
    "SeedRow",
    "PolicySummary",
    "EvaluationTable",
    "evaluate_policies",
    "write_metrics_csv",
    "format_comparison",
]

METRICS_COLUMNS = ["policy", "seed", "H_bar", "Q_bar", "TTS", "c_bar", "r_bar", "D"]


@dataclass
class SeedRow:
    policy: str
    seed: int
    h_bar: float
    q_bar: float
    tts: int | None
    c_bar: float
    r_bar: float
    d: float | None = None


@dataclass
class PolicySummary:
    policy: str
    h_mean: float
    h_sd: float
    q_mean: float
    q_sd: float
    tts_mean: float | None
    tts_sd: float | None
    c_mean: float
    r_mean: float
    d: float | None


@dataclass
class EvaluationTable:
    rows: list[SeedRow]
    summaries: list[PolicySummary]

    def summary(self, policy: str) -> PolicySummary:
        for s in self.summaries:
            if s.policy == policy:
                return s
        raise KeyError(policy)


def _row_from_trace(policy_id: str, seed: int, trace: EpisodeTrace) -> SeedRow:
    metrics = trace.metrics()
    return SeedRow(policy=policy_id, seed=seed, h_bar=metrics["H_bar"],
                   q_bar=metrics["Q_bar"], tts=metrics["TTS"],
                   c_bar=metrics["c_bar"], r_bar=metrics["r_bar"])


def evaluate_policies(scenario: Scenario, policies: dict[str, "object"],
                      seeds: list[int], max_steps: int = 300,
                      workers: int = 1) -> EvaluationTable:
    """Run each policy over every seed and aggregate Table-style metrics.

    Pareto distances use bounds pooled over the evaluated policies'
    grand-mean (c, r) points; with fewer than two policies D stays unset.
    """
    jobs = [(pid, seed) for pid in policies for seed in seeds]

    def run(job):
        pid, seed = job
        trace = run_episode(policies[pid], scenario, seed, max_steps=max_steps)
        return _row_from_trace(pid, seed, trace)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]

    summaries = []
    means = {}
    for pid in policies:
        mine = [r for r in rows if r.policy == pid]
        h = np.array([r.h_bar for r in mine])
        q = np.array([r.q_bar for r in mine])
        c = np.array([r.c_bar for r in mine])
        rr = np.array([r.r_bar for r in mine])
        tts_vals = [r.tts for r in mine if r.tts is not None]
        summaries.append(PolicySummary(
            policy=pid, h_mean=float(h.mean()), h_sd=float(h.std()),
            q_mean=float(q.mean()), q_sd=float(q.std()),
            tts_mean=float(np.mean(tts_vals)) if tts_vals else None,
            tts_sd=float(np.std(tts_vals)) if tts_vals else None,
            c_mean=float(c.mean()), r_mean=float(rr.mean()), d=None))
        means[pid] = (float(c.mean()), float(rr.mean()))

    if len(policies) >= 2:
        cs = np.array([means[pid][0] for pid in policies])
        rs = np.array([means[pid][1] for pid in policies])
        c_min, c_max = float(cs.min()), float(cs.max())
        r_min, r_max = float(rs.min()), float(rs.max())
        degenerate_c = not c_max > c_min
        degenerate_r = not r_max > r_min
        for summary in summaries:
            c_val, r_val = means[summary.policy]
            c_hat = 0.0 if degenerate_c else (c_val - c_min) / (c_max - c_min)
            r_hat = 0.0 if degenerate_r else (r_val - r_min) / (r_max - r_min)
            if not (degenerate_c or degenerate_r):
                summary.d = pareto_distance(c_val, r_val, c_min, c_max, r_min, r_max)
            else:
                summary.d = float(np.hypot(c_hat, r_hat))
        # per-seed D against bounds pooled over all (policy, seed) points
        seed_c = np.array([r.c_bar for r in rows])
        seed_r = np.array([r.r_bar for r in rows])
        sc_min, sc_max = float(seed_c.min()), float(seed_c.max())
        sr_min, sr_max = float(seed_r.min()), float(seed_r.max())
        if sc_max > sc_min and sr_max > sr_min:
            for row in rows:
                row.d = pareto_distance(row.c_bar, row.r_bar,
                                        sc_min, sc_max, sr_min, sr_max)
    return EvaluationTable(rows=rows, summaries=summaries)


def _fmt(value, digits: int = 6) -> str:
    if value is None:
        return "/"
    if isinstance(value, float):
        return repr(round(value, digits) + 0.0)
    return str(value)


def write_metrics_csv(table: EvaluationTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in table.rows:
            writer.writerow([row.policy, row.seed, repr(row.h_bar),
                             repr(row.q_bar),
                             "/" if row.tts is None else row.tts,
                             repr(row.c_bar), repr(row.r_bar),
                             "/" if row.d is None else repr(row.d)])


def format_comparison(table: EvaluationTable) -> str:
    """Plain-text comparison table; missing TTS/D print as '/'."""
    header = f"{'policy':18s} {'H_bar':>14s} {'Q_bar':>12s} {'TTS':>12s} " \
             f"{'c_bar':>10s} {'r_bar':>10s} {'D':>8s}"
    lines = [header, "-" * len(header)]
    for s in table.summaries:
        tts = "/" if s.tts_mean is None else f"{s.tts_mean:.2f}±{s.tts_sd:.2f}"
        d = "/" if s.d is None else f"{s.d:.3f}"
        lines.append(
            f"{s.policy:18s} {s.h_mean:9.2f}±{s.h_sd:<4.2f} "
            f"{s.q_mean:7.2f}±{s.q_sd:<4.2f} {tts:>12s} "
            f"{s.c_mean:10.3f} {s.r_mean:10.3f} {d:>8s}")
    return "\n".join(lines)
