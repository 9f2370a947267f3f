"""Domain types, scenario files, and the deterministic RNG contract.

Everything here is immutable after construction. All hyperparameters of a
run live in a single scenario JSON file; nothing is configured through
environment variables.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SchemaError",
    "InvariantError",
    "EpidemicState",
    "DiseaseParams",
    "ObjectiveParams",
    "ControlParams",
    "DivisionSpec",
    "GravityOdSource",
    "CsvOdSource",
    "Scenario",
    "load_scenario",
    "save_scenario",
    "scenario_hash",
    "seeded_rng",
]


class SchemaError(ValueError):
    """Scenario file does not match the expected schema."""


class InvariantError(ValueError):
    """A domain value violates its declared invariant."""


def _check(condition: bool, name: str, message: str) -> None:
    if not condition:
        raise InvariantError(f"{name}: {message}")


def _finite(value: float) -> bool:
    return math.isfinite(value)


@dataclass(frozen=True)
class EpidemicState:
    """Per-division compartment counts [S, I, H, R], persons."""

    s: float
    i: float
    h: float
    r: float

    def __post_init__(self) -> None:
        for name in ("s", "i", "h", "r"):
            value = getattr(self, name)
            _check(_finite(value), name, f"must be finite, got {value!r}")
            _check(value >= 0, name, f"must be >= 0, got {value!r}")

    @property
    def n(self) -> float:
        return self.s + self.i + self.h + self.r

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.i, self.h, self.r], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "EpidemicState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class DiseaseParams:
    """Transition rates and serial-interval description of the disease.

    ``si_mean``/``si_sd`` are the serial interval's mean and standard
    deviation in days; ``si_max`` the truncation horizon. Rates are per
    day. ``effective_infectious_period`` is the divisor turning a
    reproduction number into a daily infection rate.
    """

    gamma: float
    theta: float
    delta: float
    beta0: float
    effective_infectious_period: float
    si_mean: float
    si_sd: float
    si_max: int

    def __post_init__(self) -> None:
        for name in ("gamma", "theta", "delta", "beta0"):
            value = getattr(self, name)
            _check(0.0 <= value <= 1.0, name, f"rate must be in [0, 1], got {value!r}")
        _check(self.effective_infectious_period > 0, "effective_infectious_period",
               f"must be > 0, got {self.effective_infectious_period!r}")
        _check(self.si_mean > 0, "si_mean", f"must be > 0, got {self.si_mean!r}")
        _check(self.si_sd > 0, "si_sd", f"must be > 0, got {self.si_sd!r}")
        _check(self.si_max > 0, "si_max", f"must be > 0, got {self.si_max!r}")
        _check(self.si_max >= self.si_mean, "si_max",
               f"must be >= si_mean ({self.si_mean}), got {self.si_max!r}")


@dataclass(frozen=True)
class ObjectiveParams:
    """Scales of the dual objective indices.

    ``k_i`` is the baseline hospital-strain level, ``h0``/``l0`` the
    exponential scales of the strain and loss indices, ``lam`` the decay
    factor of accumulated restriction loss.
    """

    k_i: float = 0.8
    h0: float = 72.0
    l0: float = 64.0
    lam: float = 0.99

    def __post_init__(self) -> None:
        _check(self.k_i > 0, "k_i", f"must be > 0, got {self.k_i!r}")
        _check(self.h0 > 0, "h0", f"must be > 0, got {self.h0!r}")
        _check(self.l0 > 0, "l0", f"must be > 0, got {self.l0!r}")
        _check(0.0 <= self.lam <= 1.0, "lambda", f"must be in [0, 1], got {self.lam!r}")


@dataclass(frozen=True)
class ControlParams:
    """Episode pruning thresholds and the expert rule's trigger levels."""

    lockdown_threshold: float = 336.0
    breach_penalty: float = 100.0
    expert_h_threshold: float = 100.0
    expert_l_threshold: float = 168.0

    def __post_init__(self) -> None:
        _check(self.lockdown_threshold > 0, "lockdown_threshold",
               f"must be > 0, got {self.lockdown_threshold!r}")
        _check(self.breach_penalty >= 0, "breach_penalty",
               f"must be >= 0, got {self.breach_penalty!r}")
        _check(self.expert_h_threshold > 0, "expert_h_threshold",
               f"must be > 0, got {self.expert_h_threshold!r}")
        _check(self.expert_l_threshold > 0, "expert_l_threshold",
               f"must be > 0, got {self.expert_l_threshold!r}")


@dataclass(frozen=True)
class DivisionSpec:
    """One administrative division: index, initial state, bed capacity."""

    index: int
    initial: EpidemicState
    beds_per_1000: float = 6.92

    def __post_init__(self) -> None:
        _check(self.index >= 0, "index", f"must be >= 0, got {self.index!r}")
        _check(self.beds_per_1000 > 0, "beds_per_1000",
               f"must be > 0, got {self.beds_per_1000!r}")

    @property
    def hospital_threshold(self) -> float:
        return self.beds_per_1000 * self.initial.n / 1000.0


@dataclass(frozen=True)
class GravityOdSource:
    """Synthetic demand: gravity model over pairwise distances (km)."""

    trip_rate: float
    exponent: float
    distances_km: tuple[tuple[float, ...], ...]
    noise_sigma: float = 0.0
    days: int = 28

    def __post_init__(self) -> None:
        _check(self.trip_rate >= 0, "trip_rate", f"must be >= 0, got {self.trip_rate!r}")
        _check(self.noise_sigma >= 0, "noise_sigma",
               f"must be >= 0, got {self.noise_sigma!r}")
        _check(self.days >= 1, "days", f"must be >= 1, got {self.days!r}")
        object.__setattr__(self, "distances_km",
                           tuple(tuple(float(x) for x in row) for row in self.distances_km))


@dataclass(frozen=True)
class CsvOdSource:
    """Demand read from a day,origin,destination,flow CSV file."""

    path: str


@dataclass(frozen=True)
class Scenario:
    """Complete, validated description of one simulation setting."""

    divisions: tuple[DivisionSpec, ...]
    disease: DiseaseParams
    objectives: ObjectiveParams
    horizon: int
    seed: int
    od_source: GravityOdSource | CsvOdSource
    control: ControlParams = field(default_factory=ControlParams)

    def __post_init__(self) -> None:
        _check(self.horizon >= 1, "horizon", f"must be >= 1, got {self.horizon!r}")
        _check(len(self.divisions) >= 1, "divisions", "need at least one division")
        object.__setattr__(self, "divisions", tuple(self.divisions))
        indices = [d.index for d in self.divisions]
        _check(indices == list(range(len(indices))), "divisions",
               f"indices must be 0..K-1 in order, got {indices}")
        if isinstance(self.od_source, GravityOdSource):
            _check(len(self.od_source.distances_km) == len(self.divisions),
                   "od_source.distances_km", "must be a KxK matrix")

    @property
    def k(self) -> int:
        return len(self.divisions)

    def initial_states(self) -> np.ndarray:
        return np.stack([d.initial.as_array() for d in self.divisions])

    def populations(self) -> np.ndarray:
        return np.array([d.initial.n for d in self.divisions])

    def hospital_thresholds(self) -> np.ndarray:
        return np.array([d.hospital_threshold for d in self.divisions])


_DISEASE_KEYS = {"gamma", "theta", "delta", "beta0", "effective_infectious_period",
                 "si_mean", "si_sd", "si_max", "si_shape", "si_scale"}
_SCENARIO_KEYS = {"divisions", "disease", "objectives", "horizon", "seed",
                  "od_source", "control"}


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise SchemaError(f"{where}: missing required key '{key}'")
    return mapping[key]


def _disease_from_dict(raw: dict) -> DiseaseParams:
    unknown = set(raw) - _DISEASE_KEYS
    if unknown:
        raise SchemaError(f"disease: unknown keys {sorted(unknown)}")
    if "si_shape" in raw or "si_scale" in raw:
        # literal shape/scale parameterization; convert to mean/sd
        shape = float(_require(raw, "si_shape", "disease"))
        scale = float(_require(raw, "si_scale", "disease"))
        _check(shape > 0, "si_shape", f"must be > 0, got {shape!r}")
        _check(scale > 0, "si_scale", f"must be > 0, got {scale!r}")
        si_mean = shape * scale
        si_sd = math.sqrt(shape) * scale
    else:
        si_mean = float(_require(raw, "si_mean", "disease"))
        si_sd = float(_require(raw, "si_sd", "disease"))
    if "si_max" in raw:
        si_max = int(raw["si_max"])
    else:
        from . import rt  # local import: rt does not import core

        _check(si_mean > 0, "si_mean", f"must be > 0, got {si_mean!r}")
        _check(si_sd > 0, "si_sd", f"must be > 0, got {si_sd!r}")
        shape = (si_mean / si_sd) ** 2
        scale = si_sd * si_sd / si_mean
        si_max = rt.default_max_days(shape, scale)
    return DiseaseParams(
        gamma=float(_require(raw, "gamma", "disease")),
        theta=float(_require(raw, "theta", "disease")),
        delta=float(_require(raw, "delta", "disease")),
        beta0=float(_require(raw, "beta0", "disease")),
        effective_infectious_period=float(
            _require(raw, "effective_infectious_period", "disease")),
        si_mean=si_mean,
        si_sd=si_sd,
        si_max=si_max,
    )


def _od_source_from_dict(raw: dict, base_dir: Path) -> GravityOdSource | CsvOdSource:
    kind = _require(raw, "kind", "od_source")
    if kind == "gravity":
        return GravityOdSource(
            trip_rate=float(_require(raw, "trip_rate", "od_source")),
            exponent=float(_require(raw, "exponent", "od_source")),
            distances_km=tuple(tuple(row) for row in
                               _require(raw, "distances_km", "od_source")),
            noise_sigma=float(raw.get("noise_sigma", 0.0)),
            days=int(raw.get("days", 28)),
        )
    if kind == "csv":
        path = str(_require(raw, "path", "od_source"))
        resolved = Path(path)
        if not resolved.is_absolute():
            resolved = base_dir / resolved
        return CsvOdSource(path=str(resolved))
    raise SchemaError(f"od_source.kind: expected 'gravity' or 'csv', got {kind!r}")


def scenario_from_dict(raw: dict, base_dir: Path | None = None) -> Scenario:
    if not isinstance(raw, dict):
        raise SchemaError("scenario: top level must be a JSON object")
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise SchemaError(f"scenario: unknown keys {sorted(unknown)}")
    base_dir = base_dir or Path.cwd()
    divisions = []
    for pos, div in enumerate(_require(raw, "divisions", "scenario")):
        init = _require(div, "initial", f"divisions[{pos}]")
        state = EpidemicState(
            s=float(_require(init, "s", f"divisions[{pos}].initial")),
            i=float(_require(init, "i", f"divisions[{pos}].initial")),
            h=float(_require(init, "h", f"divisions[{pos}].initial")),
            r=float(_require(init, "r", f"divisions[{pos}].initial")),
        )
        divisions.append(DivisionSpec(
            index=int(div.get("index", pos)),
            initial=state,
            beds_per_1000=float(div.get("beds_per_1000", 6.92)),
        ))
    objectives_raw = dict(_require(raw, "objectives", "scenario"))
    if "lambda" in objectives_raw:
        objectives_raw["lam"] = objectives_raw.pop("lambda")
    try:
        objectives = ObjectiveParams(**objectives_raw)
    except TypeError as exc:
        raise SchemaError(f"objectives: {exc}") from None
    control_raw = raw.get("control", {})
    try:
        control = ControlParams(**control_raw)
    except TypeError as exc:
        raise SchemaError(f"control: {exc}") from None
    return Scenario(
        divisions=tuple(divisions),
        disease=_disease_from_dict(_require(raw, "disease", "scenario")),
        objectives=objectives,
        horizon=int(_require(raw, "horizon", "scenario")),
        seed=int(_require(raw, "seed", "scenario")),
        od_source=_od_source_from_dict(_require(raw, "od_source", "scenario"), base_dir),
        control=control,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    d = scenario.disease
    od = scenario.od_source
    if isinstance(od, GravityOdSource):
        od_raw = {"kind": "gravity", "trip_rate": od.trip_rate,
                  "exponent": od.exponent,
                  "distances_km": [list(row) for row in od.distances_km],
                  "noise_sigma": od.noise_sigma, "days": od.days}
    else:
        od_raw = {"kind": "csv", "path": od.path}
    return {
        "divisions": [
            {"index": div.index,
             "initial": {"s": div.initial.s, "i": div.initial.i,
                         "h": div.initial.h, "r": div.initial.r},
             "beds_per_1000": div.beds_per_1000}
            for div in scenario.divisions
        ],
        "disease": {"gamma": d.gamma, "theta": d.theta, "delta": d.delta,
                    "beta0": d.beta0,
                    "effective_infectious_period": d.effective_infectious_period,
                    "si_mean": d.si_mean, "si_sd": d.si_sd, "si_max": d.si_max},
        "objectives": {"k_i": scenario.objectives.k_i, "h0": scenario.objectives.h0,
                       "l0": scenario.objectives.l0,
                       "lambda": scenario.objectives.lam},
        "control": {"lockdown_threshold": scenario.control.lockdown_threshold,
                    "breach_penalty": scenario.control.breach_penalty,
                    "expert_h_threshold": scenario.control.expert_h_threshold,
                    "expert_l_threshold": scenario.control.expert_l_threshold},
        "horizon": scenario.horizon,
        "seed": scenario.seed,
        "od_source": od_raw,
    }


def load_scenario(path: str | Path) -> Scenario:
    """Read and fully validate a scenario JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(raw, base_dir=path.parent)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def scenario_hash(scenario: Scenario) -> str:
    """Stable hash of the scenario's canonical JSON form."""
    canon = json.dumps(scenario_to_dict(scenario), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def seeded_rng(seed: int, stream: str) -> np.random.Generator:
    """Deterministic, platform-independent random stream.

    Identical (seed, stream) pairs yield identical generators; distinct
    stream labels under the same seed are statistically independent.
    """
    digest = hashlib.sha256(stream.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *words])
    return np.random.default_rng(ss)
