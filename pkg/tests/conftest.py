import numpy as np
import pytest

from epimob.core import Scenario, scenario_from_dict

D_EFF_GZ = 2.10 / 0.47  # effective infectious period implied by Table-4-like ratio

GUANGZHOU_DISEASE = {
    "gamma": 0.0096, "theta": 0.13, "delta": 0.19, "beta0": 0.47,
    "effective_infectious_period": D_EFF_GZ,
    "si_mean": 7.5, "si_sd": 3.4,
}


def scenario_dict(k: int = 3, horizon: int = 60, seed: int = 2024,
                  trip_rate: float = 0.10, **overrides) -> dict:
    """Small gravity-demand scenario with an outbreak in division 0."""
    pops = [5000.0, 60000.0, 40000.0, 30000.0, 20000.0][:k]
    divisions = []
    for i, pop in enumerate(pops):
        i0 = 20.0 if i == 0 else 0.0
        beds = 30.0 if i == 0 else 6.92
        divisions.append({"initial": {"s": pop - i0, "i": i0, "h": 0.0, "r": 0.0},
                          "beds_per_1000": beds})
    base = np.array([[0.0, 40.0, 50.0, 65.0, 80.0],
                     [40.0, 0.0, 12.0, 25.0, 40.0],
                     [50.0, 12.0, 0.0, 14.0, 28.0],
                     [65.0, 25.0, 14.0, 0.0, 16.0],
                     [80.0, 40.0, 28.0, 16.0, 0.0]])[:k, :k]
    raw = {
        "divisions": divisions,
        "disease": {"gamma": 0.0096, "theta": 0.13, "delta": 0.19, "beta0": 0.47,
                    "effective_infectious_period": D_EFF_GZ,
                    "si_mean": D_EFF_GZ, "si_sd": 0.65 * D_EFF_GZ},
        "objectives": {"k_i": 0.8, "h0": 72.0, "l0": 64.0, "lambda": 0.99},
        "horizon": horizon,
        "seed": seed,
        "control": {"expert_h_threshold": 30.0},
        "od_source": {"kind": "gravity", "trip_rate": trip_rate, "exponent": 2.0,
                      "distances_km": base.tolist()},
    }
    raw.update(overrides)
    return raw


@pytest.fixture
def outbreak_scenario() -> Scenario:
    return scenario_from_dict(scenario_dict())


@pytest.fixture
def single_division_scenario() -> Scenario:
    raw = scenario_dict(k=1)
    raw["od_source"] = {"kind": "gravity", "trip_rate": 0.0, "exponent": 2.0,
                        "distances_km": [[0.0]]}
    return scenario_from_dict(raw)
