import re

import numpy as np
import pytest

from hlbiped.rigid_body import load_model, mass_matrix, stance_constraints, standing_pose
from hlbiped.rigid_body.model import _parse

ROBOTS = ("rabbit", "rabbit_ideal", "walker2d")


@pytest.fixture(scope="session")
def rabbit():
    return load_model("rabbit")


@pytest.fixture(scope="session")
def walker():
    return load_model("walker2d")


@pytest.fixture(scope="session", params=("rabbit", "walker2d"))
def robot(request):
    return load_model(request.param)


def pendulum_model(m=2.0, lc=0.3, inertia=0.05):
    """One rigid link hanging from the base point, which both 'feet' pin."""
    return _parse({
        "name": "pendulum", "nominal_height": 1.0,
        "links": [{"name": "rod", "parent": None, "joint": "pitch", "offset": [0, 0],
                   "mass": m, "com": [0.0, -lc], "inertia": inertia, "length": 2 * lc}],
        "joints": [],
        "feet": {"type": "point", "left": {"link": "rod", "sole": [0, 0]},
                 "right": {"link": "rod", "sole": [0, 0]}},
    })


def random_q(model, rng, scale=0.3):
    q = standing_pose(model)
    q[:2] += 0.1 * rng.standard_normal(2)
    q[2:] += scale * rng.standard_normal(model.n_dof - 2)
    return q


def constrained_qd(model, q, rng, leg="left", scale=0.5):
    """Random velocity consistent with a pinned stance foot."""
    qd = scale * rng.standard_normal(model.n_dof)
    _, J, _ = stance_constraints(model, q, qd, leg)
    M = mass_matrix(model, q)
    MinvJT = np.linalg.solve(M, J.T)
    return qd - MinvJT @ np.linalg.solve(J @ MinvJT, J @ qd)


# ---------------------------------------------------------------- acceptance summary
_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_(a\d+)_", report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    key = m.group(1).upper()
    if key in _ACCEPTANCE and _ACCEPTANCE[key][0] == "FAIL":
        return
    status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
    _ACCEPTANCE[key] = (status, dict(report.user_properties).get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        status, text = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<4} {status}  {text}")
