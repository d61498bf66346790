import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdetect.ensemble import (EnsembleError, SingularMixtureError, StateEnsemble, lump_partial, mixture,
                              pure_state_scenario, reduce_to_range)
from qdetect.linalg import outer

from conftest import random_ensemble


def test_single_state_mixture():
    rho = np.diag([0.3, 0.7])
    assert np.allclose(mixture(StateEnsemble((rho,), [1.0])), rho)


def test_example_mixture(example):
    assert np.allclose(example.mixture(), [[2 / 3, 1 / 3], [1 / 3, 1 / 3]])


def test_pure_state_scenario_mixture():
    n, beta = 3, 0.4
    psi = np.array([1, 1j, 0]) / np.sqrt(2)
    e = pure_state_scenario(psi, np.eye(n) / n, beta)
    assert np.allclose(e.mixture(), (1 - beta) * outer(psi) + beta / n * np.eye(n))


def test_pure_state_scenario_constructor():
    e = pure_state_scenario([1, 0], np.eye(2) / 2, 0.5)
    assert np.allclose(e.priors, [0.5, 0.5])
    assert np.allclose(e.states[0], np.diag([1, 0]))


def test_pure_residual_mixture_positive():
    e = pure_state_scenario([1, 0], np.diag([0.0, 1.0]), 0.5)
    assert np.allclose(e.mixture(), np.eye(2) / 2)


def test_pure_state_scenario_errors():
    with pytest.raises(EnsembleError):
        pure_state_scenario([1, 0], np.eye(2) / 2, 1.2)
    with pytest.raises(EnsembleError):
        pure_state_scenario([2, 0], np.eye(2) / 2, 0.5)


def test_priors_validated():
    with pytest.raises(EnsembleError) as exc:
        StateEnsemble((np.eye(2) / 2, np.eye(2) / 2), [0.6, 0.3])
    assert exc.value.field == "priors"


def test_singular_mixture_rejected():
    with pytest.raises(SingularMixtureError, match="range space"):
        StateEnsemble((np.diag([1.0, 0.0]),), [1.0])


def test_reduce_to_range():
    e, v = reduce_to_range((np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0])), [0.5, 0.5])
    assert e.dim == 2 and v.shape == (3, 2)


def test_lump_qutrit():
    e = StateEnsemble(tuple(outer(np.eye(3)[k]) for k in range(3)), np.full(3, 1 / 3))
    lumped = lump_partial(e, [0])
    assert np.allclose(lumped.priors, [1 / 3, 2 / 3])
    assert np.allclose(lumped.states[1], np.diag([0, 0.5, 0.5]))


def test_lump_requires_residual():
    e = StateEnsemble((np.eye(2) / 2, np.eye(2) / 2), [0.5, 0.5])
    with pytest.raises(EnsembleError):
        lump_partial(e, [0, 1])


@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(3, 5))
def test_lump_preserves_mixture(seed, n, m):
    e = random_ensemble(seed, n, m)
    keep = list(range(m - 2))
    assert np.linalg.norm(lump_partial(e, keep).mixture() - e.mixture()) <= 1e-12


@given(st.floats(0.1, 10.0))
def test_weight_scaling_keeps_normalization(c):
    e = StateEnsemble((np.eye(2) / 2, np.diag([1.0, 0])), [0.5, 0.5], [0.3, 0.9])
    assert np.allclose(e.with_weights(c * e.weights).normalized_weights, e.normalized_weights)
