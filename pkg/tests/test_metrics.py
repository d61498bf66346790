import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdetect.linalg import outer, random_density
from qdetect.metrics import evaluate, weighted_norms
from qdetect.povm import NoiseModel, Povm, PovmError, noisy_povm, projective_povm, rank_one_approximation

from conftest import orthogonal_pure, random_ensemble


def det_reference_povm():
    return Povm((outer([0.53, 0.85]), outer([-0.85, 0.53])), check=False)


def incl_reference_povm():
    o1, o2 = outer([0.0, 0.62]), outer([-0.62, 0.62])
    return Povm((np.eye(2) - o1 - o2, o1, o2), has_inconclusive=True, check=False)


def random_povm(seed, n, k):
    g = np.random.default_rng(seed)
    raw = [random_density(n, g) for _ in range(k)]
    s = sum(raw)
    w, u = np.linalg.eigh(s)
    r = (u / np.sqrt(w)) @ u.conj().T
    return Povm(tuple(r @ o @ r for o in raw))


def test_perfect_detection():
    e = orthogonal_pure(3)
    rep = evaluate(projective_povm(np.eye(3)), e)
    assert np.allclose(rep.conditional, np.eye(3))
    assert np.allclose(rep.e_post, 0) and np.allclose(rep.e_joint, 0) and np.allclose(rep.e_cond, 0)


def test_reference_deterministic_povm(example):
    rep = evaluate(det_reference_povm(), example)
    assert np.allclose(rep.posterior_diagonal(), 0.87, atol=0.01)
    assert rep.norms["post"]["wc"] == pytest.approx(0.13, abs=0.01)


def test_reference_inconclusive_povm(example):
    rep = evaluate(incl_reference_povm(), example)
    assert np.allclose(rep.posterior_diagonal(), 1.0, atol=1e-12)
    assert rep.p_incl == pytest.approx(0.75, abs=0.01)


def test_weighted_norms_examples(example):
    rep = evaluate(projective_povm(np.eye(2)), orthogonal_pure(2))
    assert all(v == 0 for fam in rep.norms.values() for v in fam.values())
    fake = type(rep)(rep.conditional, rep.output_dist, rep.joint, rep.posterior, rep.e_joint, rep.e_cond,
                     np.array([0.2, 0.9]), rep.matched)
    assert weighted_norms(fake, [1.0, 0.0])["post"]["wc"] == pytest.approx(0.2)


def test_degenerate_outcome_flagged(example):
    rep = evaluate(Povm((np.eye(2), np.zeros((2, 2)))), example)
    assert rep.degenerate == (1,)
    assert np.isnan(rep.e_post[1])


def test_noisy_povm_examples():
    p = projective_povm(np.eye(2))
    assert np.allclose(noisy_povm(NoiseModel.identity(2), p).elements, p.elements)
    theta = 0.3
    rot = projective_povm(np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]))
    half = noisy_povm(NoiseModel.binary(0.5), rot)
    assert all(np.allclose(o, np.eye(2) / 2) for o in half.elements)
    q = noisy_povm(NoiseModel.binary(0.1), p)
    assert np.allclose(q[0], np.diag([0.9, 0.1])) and np.allclose(q[1], np.diag([0.1, 0.9]))


def test_noise_shape_mismatch():
    with pytest.raises(PovmError):
        noisy_povm(NoiseModel.identity(3), projective_povm(np.eye(2)))
    with pytest.raises(PovmError):
        NoiseModel(np.array([[0.5, 0.2], [0.4, 0.8]]))


def test_rank_one_approximation_opt_in():
    o1 = np.diag([1.0, 1e-4])
    p = Povm((o1, np.eye(2) - o1))
    approx, applied = rank_one_approximation(p)
    assert applied == [0, 1]
    assert np.linalg.norm(sum(approx.elements) - np.eye(2)) <= 1e-8


@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(2, 4), st.booleans())
def test_probability_identities(seed, n, m, incl):
    e = random_ensemble(seed, n, m)
    povm = random_povm(seed + 7, n, m + int(incl))
    povm = Povm(povm.elements, has_inconclusive=incl)
    rep = evaluate(povm, e)
    assert np.allclose(rep.conditional.sum(axis=0), 1, atol=1e-8)
    assert rep.output_dist.sum() == pytest.approx(1, abs=1e-8)
    assert np.all(rep.conditional >= -1e-9) and np.all(rep.conditional <= 1 + 1e-9)
    ok = rep.output_dist > 1e-12
    lhs = rep.posterior[:, ok] * rep.output_dist[ok][None, :]
    assert np.allclose(lhs, (rep.conditional * e.priors[None, :])[ok].T, atol=1e-8)
    for vec in (rep.e_joint, rep.e_cond):
        assert np.all(vec >= -1e-9) and np.all(vec <= 1 + 1e-9)


@given(st.integers(0, 10_000), st.floats(0.0, 0.5))
def test_noise_commutes_with_evaluate(seed, nu0):
    e = random_ensemble(seed, 2, 2)
    povm = random_povm(seed + 1, 2, 2)
    nu = NoiseModel.binary(nu0)
    a, b = evaluate(povm, e, nu), evaluate(noisy_povm(nu, povm), e)
    assert np.allclose(a.conditional, b.conditional, atol=1e-10)
    assert np.allclose(a.posterior, b.posterior, atol=1e-10, equal_nan=True)
