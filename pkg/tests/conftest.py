import numpy as np
import pytest

from sharpnuc import fock as fk
from sharpnuc.gridspace import GridSpec, build_grid
from sharpnuc.scenario import Context, load_scenario


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(GridSpec(3, 12, 4.0))


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario("default")


@pytest.fixture(scope="session")
def default_ctx(default_scenario):
    return Context(default_scenario)


@pytest.fixture(scope="session")
def spectrum(default_ctx):
    return default_ctx.spectrum


@pytest.fixture(scope="session")
def model(spectrum):
    """Two active eigenvectors, no translations, n_max = 6."""
    return fk.build_model(spectrum, (0, 1), nmax=6)


@pytest.fixture(scope="session")
def small_scenario():
    """Cheap scenario for CLI round trips."""
    return load_scenario("default", {
        "name": "small", "grid": {"n": 16, "pmax": 6.0}, "E": 3.0, "m": 8, "refinement": [16],
        "fock": {"n_max": 6, "active": 1, "trials": 4},
        "correlations": {"top": 2, "ntest": 16, "scan_points": 16},
        "kernel": {"rho": 0.5, "radii": 3}, "eps_pad": 0.2,
        "nuclearity": {"active": 1, "n_max": 2, "max_order": 2, "restarts": 2,
                       "multinorm_configs": ["single", "pair3"], "harmonic_configs": ["single", "pair3"],
                       "n_sweep": [1, 2], "delta_sweep": [0.0, 50.0]},
        "translations": {"single": [[0, 0, 0, 0]], "pair3": [[0, 0, 0, 0], [0, 3, 0, 0]]},
    })


def random_vector(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    """Append (number, title, passed, detail); the lines are printed in the terminal summary."""
    return request.config.stash[ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(ACCEPTANCE, []))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in lines:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {title}: {detail}")
