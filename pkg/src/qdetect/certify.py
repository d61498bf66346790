"""Optimality certificates for candidate POVMs.

Each checker rebuilds the dual variables implied by a POVM and reports named
residuals, so a hand-built POVM can be tested as an ansatz just like solver
output. A POVM that violates the POVM constraints or the posterior
constraints is classed ``infeasible``; one that is feasible but admits no
valid multipliers is ``not_optimal``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .datamat import (avg_joint_matrices, data_matrices, generalized_matrices, noise_matrix,
                      normalize_weights, outcome_index)
from .ensemble import StateEnsemble
from .linalg import hermitian_part, psd_distance, rtrace
from .metrics import evaluate
from .povm import NoiseModel, Povm

FEASIBILITY_KEYS = ("povm", "primal_feasibility")


@dataclass(eq=False)
class Certificate:
    criterion: str
    passed: bool
    residuals: dict
    tol: float
    multipliers: np.ndarray | None = None
    Y: np.ndarray | None = None
    active_set: tuple = ()
    delta: float | None = None
    failure_class: str | None = None
    failed: tuple = field(default_factory=tuple)

    def summary(self) -> dict:
        return {
            "criterion": self.criterion,
            "passed": self.passed,
            "failure_class": self.failure_class,
            "failed": list(self.failed),
            "tol": self.tol,
            "delta": self.delta,
            "active_set": list(self.active_set),
            "multipliers": None if self.multipliers is None else [float(x) for x in self.multipliers],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def _finish(criterion, residuals, tol, **kw) -> Certificate:
    failed = tuple(k for k, v in residuals.items() if not v <= tol)
    if not failed:
        cls = None
    elif any(k in FEASIBILITY_KEYS for k in failed):
        cls = "infeasible"
    else:
        cls = "not_optimal"
    return Certificate(criterion, not failed, residuals, tol, failure_class=cls, failed=failed, **kw)


def certify_avg_joint(povm: Povm, e: StateEnsemble, w=None, tol: float = 1e-7) -> Certificate:
    """Check A_i - sum_j A_j O_j >= 0 and (A_i - sum_j A_j O_j) O_i = 0."""
    w = normalize_weights(e, w)
    if len(povm) != e.count or povm.has_inconclusive:
        raise ValueError("average joint certificate needs one element per state")
    a = avg_joint_matrices(e, w)
    s = sum(ai @ oi for ai, oi in zip(a, povm.elements))
    y = hermitian_part(s)
    res = {
        "povm": povm.feasibility_violation(),
        "y_hermitian": float(np.linalg.norm(s - y)),
        "stationarity_psd": max(psd_distance(ai - y) for ai in a),
        "slackness": max(float(np.linalg.norm((ai - y) @ oi)) for ai, oi in zip(a, povm.elements)),
    }
    return _finish("avg-joint", res, tol, Y=y)


def _stationarity_blocks(dm, lam, nu_mat, inconclusive, povm):
    g = generalized_matrices(dm, lam, nu_mat, inconclusive)
    s = sum(gj @ oj for gj, oj in zip(g, povm.elements))
    return g, s


def recover_multipliers(povm: Povm, dm, nu_mat, inconclusive: bool, support) -> np.ndarray:
    """Simplex multipliers supported on ``support`` minimizing ||(G_j - Y) O_j||.

    Solved as a non-negative least-squares problem with the sum-to-one row
    weighted heavily, then renormalized.
    """
    m = len(dm)
    support = list(support)
    lam = np.zeros(m)
    if not support:
        return lam
    cols = []
    for i in support:
        unit = np.zeros(m)
        unit[i] = 1.0
        g, s = _stationarity_blocks(dm, unit, nu_mat, inconclusive, povm)
        y = hermitian_part(s)
        parts = [((gj - y) @ oj).reshape(-1) for gj, oj in zip(g, povm.elements)]
        # also ask Y to be Hermitian: s - s* is linear in lambda
        parts.append((s - s.conj().T).reshape(-1))
        v = np.concatenate(parts)
        cols.append(np.concatenate([v.real, v.imag]))
    a = np.array(cols).T
    weight = 1e3 * (1.0 + np.abs(a).max())
    a = np.vstack([a, weight * np.ones(len(support))])
    b = np.zeros(a.shape[0])
    b[-1] = weight
    x, _ = nnls(a, b, maxiter=50 * len(support) + 100)
    if x.sum() > 0:
        x = x / x.sum()
    lam[support] = x
    return lam


def _certify_posterior(criterion, povm, e, w, delta, lam, nu, tol):
    w = normalize_weights(e, w)
    inconclusive = povm.has_inconclusive
    nu_mat = noise_matrix(nu, len(povm), e.count, inconclusive)
    if delta is None:
        report = evaluate(povm, e, NoiseModel(nu_mat) if nu is not None else None, weights=w)
        delta = report.norms["post"]["wc"]
    dm = data_matrices(e, w, delta)
    noisy = np.einsum("ij,jab->iab", nu_mat, np.asarray(povm.elements))
    cons = {i: rtrace(noisy[outcome_index(i, inconclusive)], dm[i]) for i in dm.constrained()}
    active = tuple(i for i, c in cons.items() if abs(c) <= tol)

    if lam is None:
        lam = recover_multipliers(povm, dm, nu_mat, inconclusive, active)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape != (e.count,):
        raise ValueError(f"expected {e.count} multipliers, got {lam.size}")

    g, s = _stationarity_blocks(dm, lam, nu_mat, inconclusive, povm)
    y = hermitian_part(s)
    z = [gj - y for gj in g]
    off = [i for i in range(e.count) if i not in active]
    res = {
        "povm": povm.feasibility_violation(),
        "primal_feasibility": max([0.0] + list(cons.values())),
        "simplex": max(abs(lam.sum() - 1.0), max(0.0, -lam.min())),
        "support": float(np.abs(lam[off]).sum()) if off else 0.0,
        "y_hermitian": float(np.linalg.norm(s - y)),
        "stationarity_psd": max(psd_distance(zj) for zj in z),
        "slackness": max(float(np.linalg.norm(zj @ oj)) for zj, oj in zip(z, povm.elements)),
        "trace_balance": abs(float(np.trace(y).real)),
    }
    if inconclusive:
        res["inconclusive_psd"] = psd_distance(z[0])
        res["inconclusive_slackness"] = float(np.linalg.norm(z[0] @ povm.elements[0]))
    return _finish(criterion, res, tol, multipliers=lam, Y=y, active_set=active, delta=float(delta))


def certify_wc_posterior(povm: Povm, e: StateEnsemble, w=None, delta: float | None = None, lam=None,
                         nu=None, tol: float = 1e-6) -> Certificate:
    """Check the worst-case posterior optimality system at ``delta``.

    With noise, G_j = sum_i lam_i nu[out(i), j] A_i(delta) plays the role of
    lam_j A_j(delta). ``delta`` defaults to the POVM's own worst-case error.
    """
    crit = "wc-posterior-noisy" if nu is not None else "wc-posterior"
    if povm.has_inconclusive:
        crit = "wc-posterior-inconclusive"
    return _certify_posterior(crit, povm, e, w, delta, lam, nu, tol)


def certify_inconclusive(povm: Povm, e: StateEnsemble, w=None, delta: float | None = None, lam=None,
                         nu=None, tol: float = 1e-6) -> Certificate:
    """As ``certify_wc_posterior`` with the extra conditions on O_0.

    Noise-free, these read -Y >= 0 and Y O_0 = 0.
    """
    if not povm.has_inconclusive:
        raise ValueError("POVM has no inconclusive element")
    return _certify_posterior("wc-posterior-inconclusive", povm, e, w, delta, lam, nu, tol)
