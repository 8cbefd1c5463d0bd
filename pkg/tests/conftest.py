import numpy as np
import pytest

from choquard.exponents import FieldSet
from choquard.mesh import DomainSpec, build_mesh
from choquard.solver import estimate_constants, lambda_threshold

MODEL = {
    "s": "min(0.3 + 0.1*abs(x1 - y1), 0.4)",
    "p": "2 + 0.2*sin(pi*x1)*sin(pi*y1)",
    "mu": "0.5",
    "alpha": "1.5",
    "r": "2.5",
}
MODEL_THETA = 5.0


def fields_from(exprs, N=1, theta=None):
    return FieldSet.from_strings(N, exprs["s"], exprs["p"], exprs["mu"], exprs["alpha"], exprs["r"], theta)


def constant_fields(N=1, s=0.4, p=2.0, mu=0.5, alpha=1.5, r=2.5, theta=None):
    return FieldSet.from_strings(N, repr(s), repr(p), repr(mu), repr(alpha), repr(r), theta)


@pytest.fixture(scope="session")
def unit_interval():
    return DomainSpec.box([0.0], [1.0])


@pytest.fixture(scope="session")
def model_fields():
    return fields_from(MODEL, theta=MODEL_THETA)


@pytest.fixture(scope="session")
def mesh64(unit_interval):
    return build_mesh(unit_interval, 64)


@pytest.fixture(scope="session")
def mesh8(unit_interval):
    return build_mesh(unit_interval, 8)


@pytest.fixture(scope="session")
def model_constants(model_fields, mesh64):
    c = estimate_constants(model_fields, mesh64, samples=200, seed=7)
    lambda_threshold(c)
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def model_pair(model_fields, mesh64, model_constants):
    """Mountain-pass and ball-minimum solutions at lambda = Lambda / 4."""
    from choquard.energy import Problem
    from choquard.solver import SolverParams, ball_minimize, mountain_pass

    lam = model_constants.Lambda / 4
    delta = model_constants.t0(lam)
    prob = Problem(model_fields, mesh64)
    mp = mountain_pass(SolverParams(lam=lam), model_fields, mesh64, prob)
    ball = ball_minimize(SolverParams(lam=lam, ball_radius=delta), model_fields, mesh64, prob)
    return lam, delta, mp, ball


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the summary prints them in order."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(number, ok, detail=""):
        lines[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
