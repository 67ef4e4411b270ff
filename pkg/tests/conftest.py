import numpy as np
import pytest

from wpflow import (
    ConstraintSpec,
    Grid,
    PotentialParams,
    RunConfig,
    construct_feasible,
    evolve,
)

# filled by the acceptance tests, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def report_criterion():
    def record(number, passed, detail):
        flag = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {flag}  {detail}"
    return record


@pytest.fixture(scope="session")
def unit_line():
    return Grid.line(1.0, 128)


@pytest.fixture(scope="session")
def potential():
    return PotentialParams(1.0)


@pytest.fixture(scope="session")
def base_spec():
    return ConstraintSpec(alpha=0.0, beta=0.5)


@pytest.fixture(scope="session")
def cos1_start(unit_line, potential, base_spec):
    return construct_feasible(base_spec, unit_line.cosine_mode((1,)), potential, unit_line)


@pytest.fixture(scope="session")
def reference_run(unit_line, potential, base_spec, cos1_start):
    """100 steps of tau = 1e-3 from the cos(pi x) start, every state kept."""
    cfg = RunConfig(base_spec, potential, unit_line, tau=1e-3, t_end=0.1, snapshot_every=1)
    return evolve(cos1_start, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
