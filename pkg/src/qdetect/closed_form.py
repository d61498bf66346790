"""Analytic detector designs for two-state problems.

All constructions split a single data matrix into its negative, zero and
positive eigenspaces and assign those projectors to the POVM elements.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensemble import EnsembleError, StateEnsemble, pure_state_scenario
from .linalg import herm_eig, hermitize, inv_sqrt, outer, projector, unit_vector
from .povm import NoiseModel, Povm

KERNEL_TOL = 1e-9


@dataclass(eq=False)
class ClosedFormResult:
    objective: float
    povm: Povm
    construction: str
    flags: dict
    ensemble: StateEnsemble
    weights: np.ndarray
    noise: NoiseModel | None = None
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GammaBound:
    gamma: float
    index: int
    values: tuple
    single_active_plausible: bool


def _check_beta(beta):
    if not 0.0 < beta < 1.0:
        raise EnsembleError(f"beta must lie in (0, 1), got {beta}", "beta")


def _psi_r(psi, r):
    psi = unit_vector(psi, name="psi")
    r = hermitize(r, name="r")
    if r.shape != (psi.size, psi.size):
        raise EnsembleError(f"r has shape {r.shape}, psi has length {psi.size}", "r")
    return psi, r


def _q(psi, r) -> float:
    """psi* r^-1 psi for positive definite r."""
    w = np.linalg.eigvalsh(r)
    if w[0] <= 1e-12:
        raise np.linalg.LinAlgError(f"r is singular (lambda_min = {w[0]:.3e})")
    return float(np.vdot(psi, np.linalg.solve(r, psi)).real)


def beta_threshold(psi, r) -> float:
    """Prior beta_0 = q / (1 + q), q = psi* r^-1 psi, above which A = beta r - (1 - beta) psi psi* >= 0."""
    psi, r = _psi_r(psi, r)
    q = _q(psi, r)
    return q / (1.0 + q)


def two_state_avg_joint(psi, r, beta: float) -> ClosedFormResult:
    """Minimum average joint error for {(psi psi*, 1 - beta), (r, beta)} with equal weights.

    O_1 projects onto the negative eigenspace of A = beta r - (1 - beta) psi psi*
    and O_2 onto the rest; the error is beta - Tr Omega_+. If A >= 0 the
    detector never declares psi.
    """
    _check_beta(beta)
    psi, r = _psi_r(psi, r)
    e = pure_state_scenario(psi, r, beta)
    a = beta * r - (1 - beta) * outer(psi)
    eig = herm_eig(a)
    neg, _, pos = eig.split(0.0)
    n = psi.size
    o1 = projector(neg)
    o2 = np.eye(n) - o1
    tr_pos = float(eig.eigenvalues[eig.eigenvalues > 0].sum())
    psd = eig.eigenvalues[0] >= 0
    obj = 1.0 - beta if psd else beta - tr_pos
    flags = {"a_psd": bool(psd), "beta_below_threshold": bool(beta < beta_threshold(psi, r))}
    return ClosedFormResult(obj, Povm((o1, o2)), "two-state-avg-joint", flags, e, np.ones(2),
                            extras={"eigenvalues": eig.eigenvalues})


def gamma_equal_weights(e: StateEnsemble, tol: float = 1e-9) -> GammaBound:
    """min_i p_i sigma_max(rho^-1/2 rho_i rho^-1/2).

    This is the optimal worst-case posterior only if a single constraint is
    active at the optimum; the flag reports whether a unique minimizer makes
    that plausible.
    """
    if np.ptp(e.weights) > 0:
        raise ValueError("gamma_equal_weights needs equal weights")
    ri = inv_sqrt(e.mixture())
    vals = tuple(float(e.priors[i] * np.linalg.eigvalsh(ri @ e.states[i] @ ri)[-1]) for i in range(e.count))
    k = int(np.argmin(vals))
    others = [v for i, v in enumerate(vals) if i != k]
    plausible = all(v > vals[k] + tol for v in others)
    return GammaBound(vals[k], k, vals, plausible)


def single_pure_wc(psi, r, beta: float) -> ClosedFormResult:
    """Worst-case posterior design for detecting psi alone (weights (1, 0)).

    gamma = (1 - beta) / (1 - beta (1 - 1/q)) with q = psi* r^-1 psi. At that
    gamma the matrix A_1 = gamma rho - (1 - beta) psi psi* is PSD with a
    one-dimensional kernel, which becomes O_1.
    """
    _check_beta(beta)
    psi, r = _psi_r(psi, r)
    q = _q(psi, r)
    e = pure_state_scenario(psi, r, beta, weights=[1.0, 0.0])
    gamma = (1 - beta) / (1 - beta * (1 - 1 / q))
    a1 = gamma * e.mixture() - (1 - beta) * outer(psi)
    eig = herm_eig(a1)
    ztol = KERNEL_TOL * max(1.0, np.linalg.norm(a1))
    neg, zero, pos = eig.split(ztol)
    o1 = projector(zero)
    o2 = np.eye(psi.size) - o1
    flags = {"kernel_rank": int(zero.shape[1]), "rank_n_minus_1": zero.shape[1] == 1 and neg.shape[1] == 0}
    return ClosedFormResult(gamma, Povm((o1, o2)), "single-pure-wc", flags, e, np.array([1.0, 0.0]),
                            extras={"q": q, "A1": a1, "eigenvalues": eig.eigenvalues})


def pure_residual_wc(rho0, phi, beta: float) -> ClosedFormResult:
    """Perfect worst-case detection of rho0 when the residual state phi phi* is pure.

    O_2 = phi phi* and O_1 = I - phi phi*; state 1 is then declared only when
    it is present. The mixture may be singular here, so the ensemble skips
    the positivity gate.
    """
    _check_beta(beta)
    rho0 = hermitize(rho0, name="rho0")
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim == 2:
        w, u = np.linalg.eigh(hermitize(phi, name="residual"))
        if w[-2:].size > 1 and w[-2] > KERNEL_TOL:
            raise EnsembleError("residual state is not rank one", "phi")
        phi = u[:, -1]
    phi = unit_vector(phi, name="phi")
    e = StateEnsemble((rho0, outer(phi)), np.array([1 - beta, beta]), np.array([1.0, 0.0]),
                      require_positive_mixture=False)
    # A_1(0) = rho - (1 - beta) rho0 = beta phi phi*
    a1 = e.mixture() - (1 - beta) * rho0
    eig = herm_eig(a1)
    ztol = KERNEL_TOL * max(1.0, np.linalg.norm(a1))
    _, zero, pos = eig.split(ztol)
    o1, o2 = projector(zero), projector(pos)
    flags = {"declares_state": bool(np.trace(o1 @ rho0).real > 1e-12)}
    return ClosedFormResult(1.0, Povm((o1, o2)), "pure-residual-wc", flags, e, np.array([1.0, 0.0]),
                            extras={"A1": a1})


def gamma_noisy_formula(n: int, beta: float, nu0: float) -> float:
    """(1 - beta) / (1 - beta (1 - 1/n - (nu0/(1 - nu0)) (n - 1)/n)) for nu0 < 1/2."""
    return (1 - beta) / (1 - beta * (1 - 1 / n - (nu0 / (1 - nu0)) * (n - 1) / n))


def gamma_noisy_limit(beta: float, nu0: float) -> float:
    """Large-n limit (1 - beta) / (1 - beta (1 - 2 nu0) / (1 - nu0))."""
    return (1 - beta) / (1 - beta * (1 - 2 * nu0) / (1 - nu0))


def single_pure_wc_noisy(psi, beta: float, nu0: float) -> ClosedFormResult:
    """Noisy single-pure-state design with r = I/n and binary noise nu(nu0).

    O_1 projects onto the negative eigenspace of A_1(gamma), which is psi
    itself. For nu0 > 1/2 the assignment swaps, which is the same problem
    as 1 - nu0 with relabeled elements. At nu0 = 1/2 every detector gives
    gamma = 1 - beta.
    """
    _check_beta(beta)
    if not 0.0 <= nu0 <= 1.0:
        raise ValueError(f"nu0 must lie in [0, 1], got {nu0}")
    psi = unit_vector(psi, name="psi")
    n = psi.size
    r = np.eye(n) / n
    e = pure_state_scenario(psi, r, beta, weights=[1.0, 0.0])
    noise = NoiseModel.binary(nu0)
    swapped = nu0 > 0.5
    degenerate = nu0 == 0.5
    eff = 1.0 - nu0 if swapped else nu0
    gamma = 1.0 - beta if degenerate else gamma_noisy_formula(n, beta, eff)
    a1 = gamma * e.mixture() - (1 - beta) * outer(psi)
    eig = herm_eig(a1)
    neg, zero, pos = eig.split(KERNEL_TOL * max(1.0, np.linalg.norm(a1)))
    p_neg = projector(neg)
    p_rest = np.eye(n) - p_neg
    o1, o2 = (p_rest, p_neg) if swapped else (p_neg, p_rest)
    tr_neg = float(eig.eigenvalues[eig.eigenvalues < 0].sum())
    tr_pos = float(eig.eigenvalues[eig.eigenvalues > 0].sum())
    flags = {"degenerate_half": degenerate, "swapped": swapped}
    extras = {"A1": a1, "trace_neg": tr_neg, "trace_pos": tr_pos,
              "trace_balance": tr_neg + eff / (1 - eff) * tr_pos if not degenerate else float("nan")}
    return ClosedFormResult(gamma, Povm((o1, o2)), "single-pure-wc-noisy", flags, e, np.array([1.0, 0.0]),
                            noise=noise, extras=extras)
