import numpy as np
import pytest

from driftlab import operators
from driftlab.eigensolve import solve_lowest
from driftlab.geometry import build_circle, build_interval, build_sphere_symmetric

SEED = 1234


@pytest.fixture(scope="session")
def circle_flat_1024():
    g = build_circle(1.0, None, 1024, name="circle_flat_1024")
    p = operators.assemble_drift_laplacian(g)
    s = solve_lowest(p, 12, seed=SEED)
    return g, p, s


@pytest.fixture(scope="session")
def interval_flat_2049():
    g = build_interval(0.0, np.pi, "neumann", None, 2049, name="interval_flat_2049")
    p = operators.assemble_drift_laplacian(g)
    s = solve_lowest(p, 12, seed=SEED)
    return g, p, s


@pytest.fixture(scope="session")
def interval_ou_2049():
    g = build_interval(-6.0, 6.0, "neumann", lambda x: x * x / 2, 2049, name="interval_ou_2049")
    p = operators.assemble_drift_laplacian(g)
    s = solve_lowest(p, 12, seed=SEED)
    return g, p, s


@pytest.fixture(scope="session")
def sphere_flat_1024():
    g = build_sphere_symmetric(1.0, None, 1024, 5, name="sphere_flat_1024")
    probs = {p.mode: p for p in operators.assemble_drift_laplacian(g)}
    specs = {m: solve_lowest(probs[m], 8, seed=SEED) for m in probs}
    return g, probs, specs
