import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdetect.design import (DesignSettings, bisect, refine_root, solve_avg_joint, solve_wc_posterior,
                            solve_wc_posterior_inconclusive, solve_wc_posterior_noisy)
from qdetect.ensemble import StateEnsemble, pure_state_scenario
from qdetect.linalg import outer
from qdetect.metrics import evaluate
from qdetect.povm import NoiseModel, rank_one_approximation

from conftest import bloch_grid_delta, orthogonal_pure, random_ensemble


def test_avg_joint_orthogonal():
    r = solve_avg_joint(orthogonal_pure(3))
    assert r.objective == pytest.approx(0, abs=1e-7)
    assert r.certificate.passed


@pytest.mark.parametrize("n,beta", [(2, 0.3), (3, 0.5), (4, 0.9)])
def test_avg_joint_single_pure(n, beta):
    psi = np.eye(n)[0]
    r = solve_avg_joint(pure_state_scenario(psi, np.eye(n) / n, beta))
    expected = beta / n if beta < n / (1 + n) else 1 - beta
    assert r.objective == pytest.approx(expected, abs=1e-6)
    assert r.report.norms["joint"]["avg"] == pytest.approx(r.objective, abs=1e-7)


def test_wc_two_state_example(example):
    r = solve_wc_posterior(example)
    assert np.allclose(r.posterior_diagonal, 0.87, atol=0.01)
    approx, _ = rank_one_approximation(r.povm)
    assert r.certificate.passed
    assert r.gamma + r.objective == pytest.approx(1.0)


def test_wc_orthogonal():
    r = solve_wc_posterior(orthogonal_pure(2), eps=1e-6)
    assert r.objective <= 1e-6


def test_noisy_identity_matches_noise_free(example):
    a = solve_wc_posterior(example)
    b = solve_wc_posterior_noisy(example, None, NoiseModel.identity(2))
    assert abs(a.objective - b.objective) <= 1e-6


def test_noisy_two_state_example(example):
    r = solve_wc_posterior_noisy(example, None, NoiseModel.binary(0.02))
    assert np.allclose(r.posterior_diagonal, 0.86, atol=0.01)
    d = [np.linalg.eigh(o)[1][:, -1] for o in r.povm.elements]
    d = [v * np.sign(v[np.argmax(np.abs(v))].real) for v in d]
    assert np.allclose(np.abs(d[0]), [0.55, 0.83], atol=0.02)


def test_noisy_matches_closed_form():
    from qdetect.closed_form import gamma_noisy_formula
    e = pure_state_scenario([1, 0, 0], np.eye(3) / 3, 0.4, weights=[1, 0])
    r = solve_wc_posterior_noisy(e, None, NoiseModel.binary(0.15))
    assert 1 - r.objective == pytest.approx(gamma_noisy_formula(3, 0.4, 0.15), abs=1e-4)


def test_inconclusive_two_state_example(example):
    r = solve_wc_posterior_inconclusive(example)
    assert np.allclose(r.posterior_diagonal, 1.0, atol=1e-4)
    assert r.p_incl == pytest.approx(0.75, abs=0.01)
    assert r.certificate.passed


def test_inconclusive_orthogonal():
    r = solve_wc_posterior_inconclusive(orthogonal_pure(2))
    assert r.objective <= 1e-6
    # min s is flat in O_0 to ~delta * p_incl here, so O_0 is only driven to the solver tolerance
    assert r.p_incl <= 1e-3


def test_bisect_brackets():
    lo, hi, payload, trace = bisect(lambda d: (d >= 0.3, d), 0.0, 1.0, 1e-4)
    assert lo < 0.3 <= hi and hi - lo <= 1e-4
    widths = [t["hi"] - t["lo"] for t in trace[1:]]
    assert all(b <= a / 2 + 1e-15 for a, b in zip(widths, widths[1:]))


def _linear_oracle(root, slope=0.4):
    s_at = {}

    def feasible(d):
        s_at[d] = slope * (root - d)
        return s_at[d] < -1e-9, d
    return feasible, s_at


def test_refine_root_tightens_bracket():
    feasible, s_at = _linear_oracle(0.3172)
    lo, hi, payload, trace = bisect(feasible, 0.0, 1.0, 1e-6)
    lo2, hi2, payload2 = refine_root(feasible, s_at, lo, hi, payload, 1e-9, trace)
    assert lo2 < 0.3172 < hi2 and hi2 == payload2
    assert hi2 - 0.3172 <= 1e-7 < hi - 0.3172
    assert trace[-1].get("refine")


def test_refine_root_leaves_boundary_bracket():
    feasible, s_at = _linear_oracle(0.0)
    lo, hi, payload, trace = bisect(feasible, 0.0, 1.0, 1e-6)
    assert refine_root(feasible, s_at, lo, hi, payload, 1e-9, trace) == (lo, hi, payload)


def test_zero_weight_state_unconstrained(example):
    r = solve_wc_posterior(example.with_weights([1.0, 0.0]))
    assert r.report.e_post[0] <= r.objective + 1e-6


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000))
def test_reported_objective_reproduced(seed):
    e = random_ensemble(seed, 2, 3)
    r = solve_wc_posterior(e, eps=1e-6)
    assert abs(r.report.norms["post"]["wc"] - r.objective) <= 1e-6 + 1e-7
    assert r.certificate.passed


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000))
def test_inconclusive_dominance(seed):
    e = random_ensemble(seed, 2, 2)
    det = solve_wc_posterior(e)
    inc = solve_wc_posterior_inconclusive(e)
    assert inc.objective <= det.objective + 1e-6
    assert inc.certificate.passed


@pytest.mark.parametrize("seed", range(20))
def test_bloch_grid_oracle(seed):
    e = random_ensemble(5000 + seed, 2, 2, pure=True)
    r = solve_wc_posterior(e)
    assert abs(r.objective - bloch_grid_delta(e)) <= 5e-3


def test_noise_degrades(example):
    base = solve_wc_posterior(example).objective
    for nu0 in (0.05, 0.15):
        assert solve_wc_posterior_noisy(example, None, NoiseModel.binary(nu0)).objective >= base - 1e-6
