import copy

import pytest

from tubeplan.abstraction import build_wts
from tubeplan.scenario import scenario_from_dict

# Small two-region world used by the fast tests: one leg each way plus
# self-loops, abstracts in a couple of seconds.
TINY_SCENARIO = {
    "name": "tiny_pair",
    "model": "single_integrator",
    "state_dim": 3,
    "workspace": {"lower": [-1.5, -1.5], "upper": [1.5, 1.5]},
    "robot_radius": 0.05,
    "regions": {
        "A": {"center": [-0.9, 0.0], "radius": 0.3},
        "B": {"center": [0.9, 0.0], "radius": 0.3},
    },
    "labels": {"A": ["home"], "B": ["goal"]},
    "initial_region": "A",
    "disturbance_bound": 0.02,
    "sigma_margin": 1.0,
    "lipschitz": 0.0,
    "gain_floor": 1.0,
    "input": {"type": "box", "bound": 0.3},
    "fhocp": {
        "horizon": "6/5",
        "step": "1/10",
        "state_weight": 0.5,
        "terminal_weight": 0.5,
        "input_weight": 0.5,
        "terminal_level": 0.1,
    },
    "settle_time": 1,
    "sim_dt": 0.01,
    "formula": "F[0,30] goal & G[0,inf] !hazard",
}

# an unused-but-bound atom keeps the formula honest about labels
TINY_SCENARIO["labels"]["A"] = ["home"]
TINY_SCENARIO["labels"]["B"] = ["goal"]
TINY_SCENARIO["regions"]["H"] = {"center": [0.0, 1.0], "radius": 0.3}
TINY_SCENARIO["labels"]["H"] = ["hazard"]


def tiny_dict():
    return copy.deepcopy(TINY_SCENARIO)


@pytest.fixture(scope="session")
def tiny_scenario():
    return scenario_from_dict(tiny_dict())


@pytest.fixture(scope="session")
def tiny_wts(tiny_scenario):
    return build_wts(tiny_scenario)


@pytest.fixture(scope="session")
def tiny_zero_scenario():
    data = tiny_dict()
    data["disturbance_bound"] = 0.0
    return scenario_from_dict(data)


@pytest.fixture(scope="session")
def tiny_zero_wts(tiny_zero_scenario):
    return build_wts(tiny_zero_scenario)
