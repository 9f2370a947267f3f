"""Origin-destination demand: ingestion, synthesis, quotas, flow splits."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ._accel import MAX_OUTFLOW_SHARE
from .core import InvariantError

__all__ = [
    "TrajectoryRecord",
    "MobilityMatrix",
    "QuotaMatrix",
    "IngestSummary",
    "read_trajectory_csv",
    "aggregate_daily_od",
    "synth_gravity_od",
    "apply_quota",
    "split_flows",
    "FlowSplit",
    "write_od_csv",
    "read_od_csv",
]

TRAJECTORY_HEADER = ["uid", "start_time", "start_lng", "start_lat",
                     "end_time", "end_lng", "end_lat", "weight"]


@dataclass(frozen=True)
class TrajectoryRecord:
    """One expanded trip between two coordinate points."""

    uid: str
    start_time: datetime
    start_lng: float
    start_lat: float
    end_time: datetime
    end_lng: float
    end_lat: float
    weight: float

    def __post_init__(self) -> None:
        if self.end_time < self.start_time:
            raise InvariantError(
                f"end_time: must be >= start_time, got {self.end_time} < {self.start_time}")
        if not self.weight >= 0:
            raise InvariantError(f"weight: must be >= 0, got {self.weight!r}")


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    try:
        return datetime.strptime(text, "%m/%d/%Y, %H:%M:%S")
    except ValueError:
        return datetime.fromisoformat(text)


@dataclass
class IngestSummary:
    """Counts reported by trajectory ingestion and aggregation."""

    total_rows: int = 0
    parsed: int = 0
    malformed: int = 0
    aggregated: int = 0
    out_of_area: int = 0
    days: int = 0
    first_day: date | None = None


def read_trajectory_csv(path: str | Path, summary: IngestSummary | None = None
                        ) -> Iterable[TrajectoryRecord]:
    """Stream records from a trajectory CSV, skipping malformed rows.

    The header must match the eight-column trajectory layout exactly.
    Malformed rows are counted in ``summary`` and skipped.
    """
    summary = summary if summary is not None else IngestSummary()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TRAJECTORY_HEADER:
            raise InvariantError(
                f"header: expected {','.join(TRAJECTORY_HEADER)}, got {header}")
        for row in reader:
            summary.total_rows += 1
            try:
                record = TrajectoryRecord(
                    uid=row[0],
                    start_time=_parse_timestamp(row[1]),
                    start_lng=float(row[2]),
                    start_lat=float(row[3]),
                    end_time=_parse_timestamp(row[4]),
                    end_lng=float(row[5]),
                    end_lat=float(row[6]),
                    weight=float(row[7]),
                )
            except (ValueError, IndexError, InvariantError):
                summary.malformed += 1
                continue
            summary.parsed += 1
            yield record


@dataclass(eq=False)
class MobilityMatrix:
    """Daily person-flows between divisions; diagonal carries no meaning."""

    day: int
    flows: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.flows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvariantError(f"flows: must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvariantError("flows: must be finite")
        if np.any(arr < 0):
            raise InvariantError("flows: must be >= 0")
        self.flows = arr

    @property
    def k(self) -> int:
        return self.flows.shape[0]

    def total(self) -> float:
        off = self.flows.copy()
        np.fill_diagonal(off, 0.0)
        return float(off.sum())


@dataclass(eq=False)
class QuotaMatrix:
    """Retained-mobility fractions in [0, 1] per division pair."""

    day: int
    quotas: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.quotas, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvariantError(f"quotas: must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvariantError("quotas: must be finite")
        if np.any(arr < 0) or np.any(arr > 1):
            raise InvariantError("quotas: entries must lie in [0, 1]")
        self.quotas = arr

    @property
    def k(self) -> int:
        return self.quotas.shape[0]


def aggregate_daily_od(
    records: Iterable[TrajectoryRecord],
    assignment: Callable[[TrajectoryRecord], tuple[int, int] | None],
    k: int,
    base_day: date | None = None,
    num_days: int | None = None,
    summary: IngestSummary | None = None,
) -> list[MobilityMatrix]:
    """Sum record weights into daily KxK demand matrices.

    A record lands on the day of its start time. ``assignment`` maps a
    record to an (origin, destination) division pair, or None for
    out-of-area records, which are counted and excluded. When
    ``base_day``/``num_days`` are given the output covers exactly that
    range (with all-zero days included); otherwise the range is inferred
    from the data.
    """
    summary = summary if summary is not None else IngestSummary()
    buckets: dict[date, np.ndarray] = {}
    for record in records:
        pair = assignment(record)
        if pair is None:
            summary.out_of_area += 1
            continue
        origin, dest = pair
        if not (0 <= origin < k and 0 <= dest < k):
            summary.out_of_area += 1
            continue
        day = record.start_time.date()
        if day not in buckets:
            buckets[day] = np.zeros((k, k))
        buckets[day][origin, dest] += record.weight
        summary.aggregated += 1

    if base_day is None:
        if not buckets:
            if num_days:
                return [MobilityMatrix(day=d, flows=np.zeros((k, k)))
                        for d in range(num_days)]
            return []
        base_day = min(buckets)
    if num_days is None:
        num_days = (max(buckets) - base_day).days + 1 if buckets else 0
    summary.first_day = base_day
    summary.days = num_days

    out = []
    for offset in range(num_days):
        day = date.fromordinal(base_day.toordinal() + offset)
        out.append(MobilityMatrix(day=offset, flows=buckets.get(day, np.zeros((k, k)))))
    return out


def synth_gravity_od(
    populations: np.ndarray,
    distances_km: np.ndarray,
    trip_rate: float,
    exponent: float,
    rng: np.random.Generator | None = None,
    noise_sigma: float = 0.0,
    day: int = 0,
) -> MobilityMatrix:
    """Gravity-model demand: flows scale with pop_i*pop_j/d_ij^exponent.

    Rows are scaled so each division emits trip_rate persons per resident
    per day; with ``noise_sigma`` > 0, entries get multiplicative
    log-normal noise (unit mean) after scaling.
    """
    pop = np.asarray(populations, dtype=np.float64)
    dist = np.asarray(distances_km, dtype=np.float64)
    k = len(pop)
    if np.any(pop <= 0):
        raise InvariantError("populations: must be > 0")
    if dist.shape != (k, k):
        raise InvariantError(f"distances_km: must be {k}x{k}, got {dist.shape}")
    if not np.allclose(dist, dist.T):
        raise InvariantError("distances_km: must be symmetric")
    if not np.allclose(np.diag(dist), 0.0):
        raise InvariantError("distances_km: diagonal must be zero")
    off_mask = ~np.eye(k, dtype=bool)
    if np.any(dist[off_mask] <= 0):
        raise InvariantError("distances_km: off-diagonal entries must be > 0")

    flows = np.zeros((k, k))
    if k > 1:
        with np.errstate(divide="ignore"):
            weight = np.outer(pop, pop) / np.where(off_mask, dist, 1.0) ** exponent
        weight[~off_mask] = 0.0
        row = weight.sum(axis=1)
        flows = weight * (trip_rate * pop / row)[:, None]
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        noise = np.exp(rng.normal(-0.5 * noise_sigma ** 2, noise_sigma, size=(k, k)))
        flows = flows * noise
        flows[~off_mask] = 0.0
    return MobilityMatrix(day=day, flows=flows)


def apply_quota(demand: MobilityMatrix, quota: QuotaMatrix) -> MobilityMatrix:
    """Element-wise restriction of demand by quota fractions."""
    if demand.k != quota.k:
        raise InvariantError(
            f"quotas: dimension mismatch, demand K={demand.k} vs quota K={quota.k}")
    if demand.day != quota.day:
        raise InvariantError(
            f"day: mismatch, demand day={demand.day} vs quota day={quota.day}")
    return MobilityMatrix(day=demand.day, flows=demand.flows * quota.quotas)


@dataclass
class FlowSplit:
    """Movement of compartments implied by an actual-mobility matrix.

    ``outflow[i, j]`` is the 4-vector moved from i to j (H forced to 0,
    remaining shares renormalized so the moved person total is kept);
    ``inflow[i]`` aggregates arrivals. Rows whose demanded outflow
    exceeded the mobile-population cap were scaled by ``row_scale``.
    """

    outflow: np.ndarray
    inflow: np.ndarray
    row_scale: np.ndarray
    zero_pop_rows: list[int] = field(default_factory=list)


def split_flows(states: np.ndarray, actual: MobilityMatrix) -> FlowSplit:
    """Split actual flows into per-compartment moves (hospitalized stay)."""
    states = np.asarray(states, dtype=np.float64)
    k = actual.k
    if states.shape != (k, 4):
        raise InvariantError(f"states: expected shape ({k}, 4), got {states.shape}")
    flows = actual.flows.copy()
    np.fill_diagonal(flows, 0.0)
    mobile = states[:, 0] + states[:, 1] + states[:, 3]
    row_tot = flows.sum(axis=1)
    cap = MAX_OUTFLOW_SHARE * mobile
    row_scale = np.ones(k)
    zero_pop = []
    for i in range(k):
        if row_tot[i] <= 0:
            continue
        if mobile[i] <= 0:
            row_scale[i] = 0.0
            zero_pop.append(i)
        elif row_tot[i] > cap[i]:
            row_scale[i] = cap[i] / row_tot[i]
    if zero_pop:
        warnings.warn(
            f"divisions {zero_pop} have no mobile population but positive "
            "demanded outflow; flows clamped to zero", stacklevel=2)
    flows *= row_scale[:, None]

    share = np.zeros((k, 4))
    pos = mobile > 0
    share[pos, 0] = states[pos, 0] / mobile[pos]
    share[pos, 1] = states[pos, 1] / mobile[pos]
    share[pos, 3] = states[pos, 3] / mobile[pos]

    outflow = flows[:, :, None] * share[:, None, :]
    inflow = flows.T @ share
    return FlowSplit(outflow=outflow, inflow=inflow, row_scale=row_scale,
                     zero_pop_rows=zero_pop)


def write_od_csv(matrices: Iterable[MobilityMatrix], path: str | Path) -> None:
    """Persist daily OD matrices as day,origin,destination,flow rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "origin", "destination", "flow"])
        for matrix in matrices:
            k = matrix.k
            for i in range(k):
                for j in range(k):
                    if i == j:
                        continue
                    writer.writerow([matrix.day, i, j, repr(matrix.flows[i, j])])


def read_od_csv(path: str | Path, k: int | None = None) -> list[MobilityMatrix]:
    """Load daily OD matrices from a day,origin,destination,flow CSV."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["day", "origin",
                                                             "destination", "flow"]:
            raise InvariantError(f"header: expected day,origin,destination,flow, got {header}")
        for row in reader:
            rows.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
    if not rows:
        return []
    if k is None:
        k = max(max(r[1], r[2]) for r in rows) + 1
    days = sorted({r[0] for r in rows})
    by_day = {d: np.zeros((k, k)) for d in days}
    for day, origin, dest, flow in rows:
        by_day[day][origin, dest] += flow
    return [MobilityMatrix(day=d, flows=by_day[d]) for d in days]
