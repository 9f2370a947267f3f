"""Command-line entry point for reproducible simulation and training runs.

Every command validates its inputs, writes a run manifest before any
result file, and emits plot-ready CSVs. Outputs are deterministic for
fixed inputs and seeds (the manifest's wall-clock field excepted).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, rt
from .core import (GravityOdSource, InvariantError, SchemaError, Scenario,
                   load_scenario, scenario_hash, seeded_rng)
from .env import run_episode
from .mobility import (TrajectoryRecord, IngestSummary, aggregate_daily_od,
                       read_trajectory_csv, synth_gravity_od, write_od_csv)
from .policies import HEURISTIC_POLICIES, TrainConfig, load_policy, make_policy
from .policies import save_policy as save_policy_file
from .policies import train as train_policy
from .report import evaluate_policies, format_comparison, write_metrics_csv

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise SchemaError(f"seeds: expected comma-separated integers, got {text!r}")


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    scenario: Scenario | None, input_files: list[Path],
                    extra: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "argv": [a for a in sys.argv[1:]],
        "scenario_hash": scenario_hash(scenario) if scenario else None,
        "input_hashes": {str(p): _file_hash(p) for p in input_files if p.exists()},
        "seeds": getattr(args, "seeds", None),
        "policies": getattr(args, "policies", None) or getattr(args, "policy", None),
        "out_dir": str(out_dir),
        "wall_clock": time.time(),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _resolve_policies(spec_text: str) -> dict:
    policies = {}
    for token in spec_text.split(","):
        token = token.strip()
        if not token:
            continue
        if token.startswith("learned="):
            policies["learned"] = load_policy(token.split("=", 1)[1])
        elif token in HEURISTIC_POLICIES:
            policies[token] = make_policy(token)
        else:
            raise SchemaError(
                f"policy: unknown id {token!r}; known: "
                f"{sorted(HEURISTIC_POLICIES)} or learned=PATH")
    return policies


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    seeds = _parse_seeds(args.seeds)
    policies = _resolve_policies(args.policy)
    if len(policies) != 1:
        raise SchemaError("simulate: exactly one --policy expected")
    out_dir = Path(args.out)
    _write_manifest(out_dir, "simulate", args, scenario, [Path(args.scenario)])
    policy_id, policy = next(iter(policies.items()))
    table = evaluate_policies(scenario, {policy_id: policy}, seeds,
                              max_steps=args.max_steps, workers=args.workers)
    for seed in seeds:
        trace = run_episode(policy, scenario, seed, max_steps=args.max_steps)
        trace.save(out_dir / f"trace-{policy_id}-{seed}")
    write_metrics_csv(table, out_dir / "metrics.csv")
    print(format_comparison(table))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    seeds = _parse_seeds(args.seeds)
    policies = _resolve_policies(args.policies)
    if len(policies) < 2:
        raise SchemaError("evaluate: need at least 2 policies to pool D bounds")
    out_dir = Path(args.out)
    _write_manifest(out_dir, "evaluate", args, scenario, [Path(args.scenario)])
    table = evaluate_policies(scenario, policies, seeds,
                              max_steps=args.max_steps, workers=args.workers)
    write_metrics_csv(table, out_dir / "metrics.csv")
    text = format_comparison(table)
    (out_dir / "comparison.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_estimate_rt(args: argparse.Namespace) -> int:
    path = Path(args.incidence)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty incidence file")
        expected = ["day", "division", "new_infections"]
        if [h.strip() for h in header] != expected:
            raise SchemaError(f"{path}: header must be {','.join(expected)}")
        for row in reader:
            rows.append((int(row[0]), int(row[1]), float(row[2])))
    if not rows:
        raise SchemaError(f"{path}: no incidence rows")

    if args.si_shape is not None or args.si_scale is not None:
        if args.si_shape is None or args.si_scale is None:
            raise SchemaError("estimate-rt: --si-shape and --si-scale go together")
        si = rt.SerialInterval(args.si_shape, args.si_scale,
                               args.si_max or rt.default_max_days(
                                   args.si_shape, args.si_scale))
    else:
        si = rt.SerialInterval.from_mean_sd(args.si_mean, args.si_sd, args.si_max)
    period = args.period if args.period is not None else si.mean

    out_dir = Path(args.out)
    _write_manifest(out_dir, "estimate-rt", args, None, [path],
                    extra={"si": {"shape": si.shape, "scale": si.scale,
                                  "max_days": si.max_days}, "period": period})

    divisions = sorted({r[1] for r in rows})
    n_days = max(r[0] for r in rows) + 1
    counts = np.zeros((n_days, len(divisions)))
    index = {d: j for j, d in enumerate(divisions)}
    for day, division, value in rows:
        counts[day, index[division]] += value

    with open(out_dir / "rt.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "division", "rt_raw", "rt_corrected", "beta",
                         "imputed_flag"])
        for division in divisions:
            series = counts[:, index[division]]
            if not np.any(series > 0):
                print(f"warning: division {division} has all-zero incidence; skipped")
                continue
            estimate = rt.estimate_rt(series, si)
            for day in range(n_days):
                raw = estimate.raw[day]
                corrected = estimate.corrected[day]
                defined = not np.isnan(raw)
                writer.writerow([
                    day, division,
                    repr(float(raw)) if defined else "",
                    repr(float(corrected)) if defined else "",
                    repr(rt.beta_from_rt(float(corrected), period)) if defined else "",
                    int(bool(estimate.imputed[day])),
                ])
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    seeds = _parse_seeds(args.seeds)
    config = TrainConfig(episodes=args.episodes, lr=args.lr, eta=args.eta,
                         tau=args.tau, rho0=args.rho0,
                         batch_size=args.batch_size, max_steps=args.max_steps,
                         expert_prefill_episodes=args.expert_prefill,
                         use_ewm=not args.no_ewm)
    out_dir = Path(args.out)
    _write_manifest(out_dir, "train", args, scenario, [Path(args.scenario)],
                    extra={"hyperparameters": {
                        "episodes": config.episodes, "lr": config.lr,
                        "eta": config.eta, "tau": config.tau,
                        "rho0": config.rho0, "rho_decay": config.rho_decay,
                        "rho_every": config.rho_every,
                        "batch_size": config.batch_size,
                        "max_steps": config.max_steps}})
    for seed in seeds:
        result = train_policy(scenario, config, seed)
        save_policy_file(result, out_dir / f"policy-{seed}.npz")
        with open(out_dir / f"curve-{seed}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "mean_return", "rho", "noise_sigma"])
            for row in result.curve:
                writer.writerow([row["episode"], repr(row["mean_return"]),
                                 repr(row["rho"]), repr(row["noise_sigma"])])
        print(f"seed {seed}: final-10 mean return "
              f"{np.mean([r['mean_return'] for r in result.curve[-10:]]):.3f}")
    return EXIT_OK


def cmd_synth_od(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario = load_scenario(args.scenario)
        if not isinstance(scenario.od_source, GravityOdSource):
            raise SchemaError("synth-od: scenario od_source is not gravity")
        source = scenario.od_source
        populations = scenario.populations()
        distances = np.asarray(source.distances_km)
        trip_rate, exponent = source.trip_rate, source.exponent
        noise_sigma, days = source.noise_sigma, args.days or source.days
        seed = scenario.seed
        input_files = [Path(args.scenario)]
    else:
        if not args.populations or not args.distances:
            raise SchemaError("synth-od: need --scenario or both "
                              "--populations and --distances")
        populations = np.array([float(x) for x in args.populations.split(",")])
        distances = np.loadtxt(args.distances, delimiter=",", ndmin=2)
        trip_rate, exponent = args.trip_rate, args.exponent
        noise_sigma, days = args.noise_sigma, args.days or 28
        seed = args.seed
        input_files = [Path(args.distances)]
    out_dir = Path(args.out)
    _write_manifest(out_dir, "synth-od", args, None, input_files,
                    extra={"trip_rate": trip_rate, "exponent": exponent,
                           "noise_sigma": noise_sigma, "days": days,
                           "seed": seed})
    rng = seeded_rng(seed, "od") if noise_sigma > 0 else None
    matrices = [synth_gravity_od(populations, distances, trip_rate, exponent,
                                 rng=rng, noise_sigma=noise_sigma, day=day)
                for day in range(days)]
    write_od_csv(matrices, out_dir / "od.csv")
    total = sum(m.total() for m in matrices)
    print(f"wrote {days} days, {total:.0f} person-trips total")
    return EXIT_OK


def _nearest_centroid_assignment(centroids: np.ndarray):
    def assign(record: TrajectoryRecord):
        start = np.array([record.start_lng, record.start_lat])
        end = np.array([record.end_lng, record.end_lat])
        origin = int(np.argmin(((centroids - start) ** 2).sum(axis=1)))
        dest = int(np.argmin(((centroids - end) ** 2).sum(axis=1)))
        return origin, dest
    return assign


def cmd_aggregate_od(args: argparse.Namespace) -> int:
    centroid_rows = []
    with open(args.centroids, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["division", "lng", "lat"]:
            raise SchemaError("centroids: header must be division,lng,lat")
        for row in reader:
            centroid_rows.append((int(row[0]), float(row[1]), float(row[2])))
    centroid_rows.sort()
    if [r[0] for r in centroid_rows] != list(range(len(centroid_rows))):
        raise SchemaError("centroids: division ids must be 0..K-1")
    centroids = np.array([[r[1], r[2]] for r in centroid_rows])

    out_dir = Path(args.out)
    _write_manifest(out_dir, "aggregate-od", args, None,
                    [Path(args.trajectories), Path(args.centroids)])
    summary = IngestSummary()
    records = read_trajectory_csv(args.trajectories, summary)
    matrices = aggregate_daily_od(records, _nearest_centroid_assignment(centroids),
                                  k=len(centroids), summary=summary)
    write_od_csv(matrices, out_dir / "od.csv")
    print(f"rows={summary.total_rows} parsed={summary.parsed} "
          f"malformed={summary.malformed} aggregated={summary.aggregated} "
          f"out_of_area={summary.out_of_area} days={summary.days}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epimob",
        description="Metapopulation epidemic control laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="roll a policy over seeds")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--policy", required=True)
    sim.add_argument("--seeds", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--max-steps", type=int, default=300)
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    ev = sub.add_parser("evaluate", help="compare policies on one scenario")
    ev.add_argument("--scenario", required=True)
    ev.add_argument("--policies", required=True,
                    help="comma list, e.g. none,expert,learned=policy.npz")
    ev.add_argument("--seeds", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--max-steps", type=int, default=300)
    ev.add_argument("--workers", type=int, default=1)
    ev.set_defaults(func=cmd_evaluate)

    est = sub.add_parser("estimate-rt", help="estimate R_t from incidence CSV")
    est.add_argument("--incidence", required=True)
    est.add_argument("--out", required=True)
    est.add_argument("--si-mean", type=float, default=7.5)
    est.add_argument("--si-sd", type=float, default=3.4)
    est.add_argument("--si-max", type=int, default=None)
    est.add_argument("--si-shape", type=float, default=None)
    est.add_argument("--si-scale", type=float, default=None)
    est.add_argument("--period", type=float, default=None,
                     help="effective infectious period; defaults to the SI mean")
    est.set_defaults(func=cmd_estimate_rt)

    tr = sub.add_parser("train", help="train the multi-agent policy")
    tr.add_argument("--scenario", required=True)
    tr.add_argument("--seeds", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--episodes", type=int, default=500)
    tr.add_argument("--lr", type=float, default=0.0001)
    tr.add_argument("--eta", type=float, default=0.9)
    tr.add_argument("--tau", type=float, default=0.01)
    tr.add_argument("--rho0", type=float, default=0.5)
    tr.add_argument("--batch-size", type=int, default=64)
    tr.add_argument("--max-steps", type=int, default=300)
    tr.add_argument("--expert-prefill", type=int, default=20)
    tr.add_argument("--no-ewm", action="store_true")
    tr.set_defaults(func=cmd_train)

    so = sub.add_parser("synth-od", help="generate gravity-model demand CSV")
    so.add_argument("--scenario")
    so.add_argument("--populations", help="comma list of person counts")
    so.add_argument("--distances", help="CSV file with a KxK km matrix")
    so.add_argument("--trip-rate", type=float, default=0.3)
    so.add_argument("--exponent", type=float, default=2.0)
    so.add_argument("--noise-sigma", type=float, default=0.0)
    so.add_argument("--days", type=int, default=None)
    so.add_argument("--seed", type=int, default=0)
    so.add_argument("--out", required=True)
    so.set_defaults(func=cmd_synth_od)

    ag = sub.add_parser("aggregate-od", help="aggregate trajectory CSV to daily OD")
    ag.add_argument("--trajectories", required=True)
    ag.add_argument("--centroids", required=True,
                    help="CSV division,lng,lat for nearest-centroid assignment")
    ag.add_argument("--out", required=True)
    ag.set_defaults(func=cmd_aggregate_od)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, InvariantError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
