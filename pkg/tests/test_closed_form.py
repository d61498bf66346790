import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdetect.certify import certify_avg_joint, certify_wc_posterior
from qdetect.closed_form import (beta_threshold, gamma_equal_weights, gamma_noisy_formula, gamma_noisy_limit,
                                 pure_residual_wc, single_pure_wc, single_pure_wc_noisy, two_state_avg_joint)
from qdetect.ensemble import StateEnsemble
from qdetect.linalg import outer
from qdetect.metrics import evaluate

from conftest import orthogonal_pure


@pytest.mark.parametrize("n", [2, 3, 5])
@pytest.mark.parametrize("beta", [0.2, 0.5, 0.8, 0.9])
def test_two_state_avg_joint_identity_residual(n, beta):
    psi = np.eye(n)[0]
    res = two_state_avg_joint(psi, np.eye(n) / n, beta)
    b0 = n / (1 + n)
    if beta < b0:
        assert res.objective == pytest.approx(beta / n)
        p = evaluate(res.povm, res.ensemble).posterior_diagonal()
        assert p[0] == pytest.approx((1 - beta) / (1 - beta * (1 - 1 / n)))
        # O_2 = I - psi psi* never fires on psi, so the residual posterior is exactly 1
        assert p[1] == pytest.approx(1.0)
    else:
        assert res.objective == pytest.approx(1 - beta)
        assert np.allclose(res.povm[0], 0) and np.allclose(res.povm[1], np.eye(n))
    rep = evaluate(res.povm, res.ensemble)
    assert rep.norms["joint"]["avg"] == pytest.approx(res.objective, abs=1e-9)
    assert certify_avg_joint(res.povm, res.ensemble, tol=1e-7).passed


def test_two_state_avg_joint_values():
    res = two_state_avg_joint([1, 0], np.eye(2) / 2, 0.4)
    p = evaluate(res.povm, res.ensemble).posterior_diagonal()
    assert res.objective == pytest.approx(0.2)
    assert p == pytest.approx([0.75, 1.0])


def test_beta_threshold_examples():
    assert beta_threshold([1, 0, 0], np.eye(3) / 3) == pytest.approx(3 / 4)
    assert beta_threshold([1, 0], np.eye(2) / 2) == pytest.approx(2 / 3)
    assert beta_threshold([0, 1], np.diag([0.9, 0.1])) == pytest.approx(10 / 11)
    with pytest.raises(np.linalg.LinAlgError):
        beta_threshold([1, 0], np.diag([1.0, 0.0]))


def test_gamma_equal_weights_orthogonal():
    g = gamma_equal_weights(orthogonal_pure(3))
    assert np.allclose(g.values, 1.0)
    assert not g.single_active_plausible


def test_gamma_equal_weights_example(example):
    g = gamma_equal_weights(example)
    assert np.allclose(g.values, 1.0)
    assert not g.single_active_plausible


def test_gamma_equal_weights_single_pure():
    psi, beta = np.array([0.6, 0.8]), 0.3
    r = np.diag([0.7, 0.3])
    e = StateEnsemble((outer(psi), r), [1 - beta, beta])
    rho_inv = np.linalg.inv(e.mixture())
    assert gamma_equal_weights(e).values[0] == pytest.approx((1 - beta) * (psi @ rho_inv @ psi))


def test_single_pure_wc_examples():
    assert single_pure_wc(np.eye(4)[0], np.eye(4) / 4, 0.5).objective == pytest.approx(0.8)
    res = single_pure_wc([0, 1], np.diag([0.999, 0.001]), 0.5)
    assert res.objective == pytest.approx(0.5 / (1 - 0.5 * (1 - 0.001)), rel=1e-9)
    assert res.flags["rank_n_minus_1"]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_single_pure_wc_identity_formula(n):
    beta = 0.35
    res = single_pure_wc(np.eye(n)[1], np.eye(n) / n, beta)
    assert res.objective == pytest.approx((1 - beta) / (1 - beta * (1 - 1 / n)))
    rep = evaluate(res.povm, res.ensemble, weights=res.weights)
    assert 1 - rep.e_post[0] == pytest.approx(res.objective, abs=1e-9)


def test_single_pure_wc_certified():
    rng = np.random.default_rng(4)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    r = g @ g.conj().T
    r /= np.trace(r).real
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    res = single_pure_wc(psi / np.linalg.norm(psi), r, 0.6)
    delta = 1 - res.objective
    cert = certify_wc_posterior(res.povm, res.ensemble, res.weights, delta=delta, tol=1e-7)
    assert cert.passed
    bad = certify_wc_posterior(res.povm, res.ensemble, res.weights, delta=delta - 0.05, tol=1e-7)
    assert not bad.passed and "primal_feasibility" in bad.failed


@given(st.floats(0.05, 0.95), st.floats(1.01, 50.0))
def test_gamma_increasing_in_q(beta, q):
    # psi = e1, r = diag(1/q, 1 - 1/q) gives psi* r^-1 psi = q
    def gam(qq):
        return single_pure_wc([1, 0], np.diag([1 / qq, 1 - 1 / qq]), beta).objective
    assert gam(q * 1.5) >= gam(q) - 1e-12


def test_pure_residual_examples():
    res = pure_residual_wc(np.diag([1.0, 0]), [0, 1], 0.3)
    assert np.allclose(res.povm[0], np.diag([1, 0])) and np.allclose(res.povm[1], np.diag([0, 1]))
    res = pure_residual_wc(np.eye(2) / 2, [0, 1], 0.5)
    assert res.objective == 1.0
    assert np.allclose(res.povm[1], np.diag([0, 1]))
    rep = evaluate(res.povm, res.ensemble, weights=res.weights)
    assert rep.e_post[0] <= 1e-9


def test_noisy_closed_form_examples():
    assert single_pure_wc_noisy([1, 0], 0.5, 0.1).objective == pytest.approx(0.642857, abs=1e-6)
    assert single_pure_wc_noisy([1, 0, 0], 0.4, 0.0).objective == pytest.approx(
        single_pure_wc([1, 0, 0], np.eye(3) / 3, 0.4).objective)
    n64 = single_pure_wc_noisy(np.eye(64)[0], 0.5, 0.1).objective
    assert abs(n64 - gamma_noisy_limit(0.5, 0.1)) <= 0.02 * gamma_noisy_limit(0.5, 0.1)


def test_noisy_closed_form_certified():
    res = single_pure_wc_noisy([1, 0], 0.5, 0.1)
    cert = certify_wc_posterior(res.povm, res.ensemble, res.weights, delta=1 - res.objective, nu=res.noise,
                                tol=1e-7)
    assert cert.passed
    assert abs(res.extras["trace_balance"]) <= 1e-7


def test_noisy_half_and_swap():
    half = single_pure_wc_noisy([1, 0], 0.5, 0.5)
    assert half.flags["degenerate_half"] and half.objective == pytest.approx(0.5)
    low, high = single_pure_wc_noisy([1, 0], 0.5, 0.2), single_pure_wc_noisy([1, 0], 0.5, 0.8)
    assert high.objective == pytest.approx(low.objective)
    assert np.allclose(high.povm[0], low.povm[1])
    rep = evaluate(high.povm, high.ensemble, high.noise, weights=high.weights)
    assert 1 - rep.e_post[0] == pytest.approx(high.objective, abs=1e-9)


@given(st.integers(2, 8), st.floats(0.05, 0.95), st.floats(0.001, 0.499))
def test_noise_lowers_gamma(n, beta, nu0):
    assert gamma_noisy_formula(n, beta, nu0) < gamma_noisy_formula(n, beta, 0.0)
