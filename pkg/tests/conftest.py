import copy
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maniplan.geometry import Pose, PosedMesh, make_box_mesh
from maniplan.scenario_io import build_world, scenario_from_dict


def deep_merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


MINIMAL_SCENARIO = {"targets": {"final_m": [0.0, 5.0, 1.6]}}


def make_scenario_dict(**overrides) -> dict:
    return deep_merge(MINIMAL_SCENARIO, overrides)


def make_world(**overrides):
    return build_world(scenario_from_dict(make_scenario_dict(**overrides)))


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def unit_cube():
    return make_box_mesh((1.0, 1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_triangle(rng, scale=2.0, min_area=1e-3):
    """Non-degenerate random triangle inside a +-scale box."""
    while True:
        tri = rng.uniform(-scale, scale, size=(3, 3))
        area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
        if area > min_area:
            return tri


def random_posed_box(rng, center_range=1.0, size_range=(0.3, 1.5)):
    size = rng.uniform(*size_range, size=3)
    mesh = make_box_mesh(size)
    pose = Pose(
        rng.uniform(-center_range, center_range),
        rng.uniform(-center_range, center_range),
        rng.uniform(-0.3, 0.3),
        rng.uniform(-np.pi, np.pi),
    )
    return PosedMesh(mesh, pose)
