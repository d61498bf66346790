import numpy as np
import pytest
from hypothesis import settings

from qdetect.ensemble import StateEnsemble, two_state_example
from qdetect.linalg import outer, random_density, random_unit

settings.register_profile("ci", max_examples=25, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def example():
    return two_state_example()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_ensemble(seed, n=2, m=2, pure=False):
    g = np.random.default_rng(seed)
    states = tuple(outer(random_unit(n, g)) if pure else random_density(n, g) for _ in range(m))
    priors = g.dirichlet(np.ones(m))
    return StateEnsemble(states, priors)


def orthogonal_pure(n=2, priors=None):
    states = tuple(outer(np.eye(n)[k]) for k in range(n))
    return StateEnsemble(states, np.full(n, 1 / n) if priors is None else np.asarray(priors))


def bloch_grid_delta(e, k=400):
    """Smallest worst-case posterior error over O_1 = v v*, O_2 = I - O_1 with v on a Bloch grid."""
    theta = np.linspace(0, np.pi, k)
    phi = np.linspace(0, 2 * np.pi, k, endpoint=False)
    t, f = np.meshgrid(theta, phi, indexing="ij")
    v0 = np.cos(t / 2)
    v1 = np.exp(1j * f) * np.sin(t / 2)
    r1, r2 = e.states
    p1, p2 = e.priors

    def quad(r):
        return (np.abs(v0) ** 2 * r[0, 0] + np.abs(v1) ** 2 * r[1, 1]
                + 2 * (np.conj(v0) * v1 * r[0, 1]).real).real

    a1, a2 = quad(r1), quad(r2)
    out1 = p1 * a1 + p2 * a2
    out2 = 1 - out1
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = np.where(out1 > 1e-12, 1 - p1 * a1 / out1, np.inf)
        e2 = np.where(out2 > 1e-12, 1 - p2 * (1 - a2) / out2, np.inf)
    return float(np.max([e1, e2], axis=0).min())


ACCEPTANCE = {}


def record(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
