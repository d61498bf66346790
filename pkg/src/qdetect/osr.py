"""Uncertain dynamics and fixed-POVM channel design in operator-sum form.

A channel is parameterized by a PSD matrix X over a basis {B_mu} of n x n
matrices:

    Q(rho, X) = sum_{mu,nu} X[mu, nu] B_mu rho B_nu*

so that X = sum_k vec_B(K_k) vec_B(K_k)* for Kraus operators K_k. The
completeness operator is K_0 = sum_{mu,nu} X[mu, nu] B_nu* B_mu and must
satisfy K_0 <= I.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .datamat import data_matrices, normalize_weights
from .design import DesignSettings, SolverFailure, bisect
from .ensemble import EnsembleError, StateEnsemble
from .linalg import hermitian_basis, hermitian_part, hermitize
from .povm import Povm
from .sdp import LinearMap, SdpProblem, solve_feasibility

log = logging.getLogger(__name__)

TRACE_FLOOR = 1e-3


def apply_uncertain_dynamics(e: StateEnsemble, unitaries) -> StateEnsemble:
    """rho_j -> sum_k p_k U_k rho_j U_k* for a random unitary drawn from ``unitaries``.

    ``unitaries`` is a sequence of ``(U_k, p_k)`` pairs.
    """
    pairs = list(unitaries)
    if not pairs:
        raise EnsembleError("need at least one unitary", "unitaries")
    probs = np.array([float(p) for _, p in pairs])
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise EnsembleError("unitary probabilities must be non-negative and sum to 1", "unitaries")
    us = []
    for k, (u, _) in enumerate(pairs):
        u = np.asarray(u, dtype=complex)
        if u.shape != (e.dim, e.dim) or np.linalg.norm(u.conj().T @ u - np.eye(e.dim)) > 1e-9:
            raise EnsembleError(f"unitaries[{k}] is not a {e.dim}x{e.dim} unitary", f"unitaries[{k}]")
        us.append(u)
    states = tuple(sum(p * u @ s @ u.conj().T for u, p in zip(us, probs)) for s in e.states)
    return StateEnsemble(states, e.priors, e.weights, e.require_positive_mixture)


@dataclass(frozen=True, eq=False)
class MatrixBasis:
    dim: int
    elements: np.ndarray
    gram: np.ndarray
    condition: float

    def __len__(self):
        return self.elements.shape[0]


def make_basis(elements) -> MatrixBasis:
    b = np.asarray(elements, dtype=complex)
    if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[0] != b.shape[1] ** 2:
        raise ValueError(f"a basis of n x n matrices needs n^2 elements, got shape {b.shape}")
    flat = b.reshape(b.shape[0], -1)
    gram = flat.conj() @ flat.T
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(f"basis elements are linearly dependent (Gram condition {cond:.3e})")
    return MatrixBasis(b.shape[1], b, gram, cond)


def standard_basis(n: int) -> MatrixBasis:
    """Matrix units E_ab, indexed mu = a n + b."""
    if n < 1:
        raise ValueError("n must be positive")
    b = np.zeros((n * n, n, n), dtype=complex)
    for a in range(n):
        for c in range(n):
            b[a * n + c, a, c] = 1.0
    return MatrixBasis(n, b, np.eye(n * n), 1.0)


def channel_action(rho, x, basis: MatrixBasis) -> np.ndarray:
    """Q(rho, X) = sum X[mu, nu] B_mu rho B_nu*."""
    b = basis.elements
    left = np.einsum("mab,bc->mac", b, rho)
    return np.einsum("mv,mac,vdc->ad", x, left, b.conj())


def completeness(x, basis: MatrixBasis) -> np.ndarray:
    """K_0 = sum X[mu, nu] B_nu* B_mu."""
    b = basis.elements
    return np.einsum("mv,vkj,mki->ji", x, b.conj(), b)


def _completeness_adjoint(g, basis: MatrixBasis) -> np.ndarray:
    # C[nu, mu] = Tr(G B_nu* B_mu), so Re Tr(C X) = Re Tr(G K_0(X))
    b = basis.elements
    return np.einsum("ij,vkj,mki->vm", g, b.conj(), b)


def build_R(rho, o, basis: MatrixBasis) -> np.ndarray:
    """[R]_{mu,nu} = Tr(B_nu rho B_mu* O), so that Tr(X R) = Tr O Q(rho, X)."""
    b = basis.elements
    t = np.einsum("vab,bc->vac", b, rho)
    # Tr(B_nu rho B_mu* O) = sum t_nu[a,c] conj(B_mu[d,c]) O[d,a]
    return np.einsum("vac,mdc,da->mv", t, b.conj(), o)


@dataclass(frozen=True, eq=False)
class KrausSet:
    operators: tuple

    @property
    def k0(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.operators)

    def apply(self, rho) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def __len__(self):
        return len(self.operators)


@dataclass(frozen=True, eq=False)
class XMatrix:
    matrix: np.ndarray
    basis: MatrixBasis

    def completeness(self) -> np.ndarray:
        return completeness(self.matrix, self.basis)

    def channel(self, rho) -> np.ndarray:
        return channel_action(rho, self.matrix, self.basis)

    def rank(self, tol: float = 1e-6) -> int:
        w = np.linalg.eigvalsh(hermitian_part(self.matrix))
        return int(np.sum(w > tol * max(w[-1], 1e-300)))

    def top_fraction(self) -> float:
        """Largest eigenvalue over trace."""
        w = np.linalg.eigvalsh(hermitian_part(self.matrix))
        return float(w[-1] / w.sum())


def kraus_from_x(x, basis: MatrixBasis, tol: float = 1e-9) -> KrausSet:
    """K_k = sqrt(s_k) sum_mu V[mu, k] B_mu for the eigenpairs with s_k > tol s_1."""
    x = x.matrix if isinstance(x, XMatrix) else x
    w, v = np.linalg.eigh(hermitian_part(x))
    w, v = w[::-1], v[:, ::-1]
    if w[0] <= 0:
        return KrausSet(())
    keep = w > tol * w[0]
    ops = tuple(np.sqrt(w[k]) * np.tensordot(v[:, k], basis.elements, axes=1) for k in np.flatnonzero(keep))
    return KrausSet(ops)


def x_from_kraus(ops, basis: MatrixBasis) -> np.ndarray:
    """X = sum_k c_k c_k* where K_k = sum_mu c_k[mu] B_mu."""
    flat = basis.elements.reshape(len(basis), -1).T
    x = np.zeros((len(basis), len(basis)), dtype=complex)
    for k in ops:
        c = np.linalg.solve(flat, np.asarray(k, dtype=complex).reshape(-1))
        x += np.outer(c, c.conj())
    return x


def identity_channel_x(basis: MatrixBasis) -> np.ndarray:
    return x_from_kraus([np.eye(basis.dim)], basis)


def channel_posteriors(e: StateEnsemble, povm: Povm, x, basis: MatrixBasis) -> np.ndarray:
    """p_i Tr O_i Q(rho_i) / Tr O_i Q(rho); NaN where the denominator vanishes."""
    q_rho = channel_action(e.mixture(), x, basis)
    out = np.full(e.count, np.nan)
    for i in range(e.count):
        den = np.trace(povm[i] @ q_rho).real
        if den > 1e-12:
            out[i] = e.priors[i] * np.trace(povm[i] @ channel_action(e.states[i], x, basis)).real / den
    return out


@dataclass(eq=False)
class OsrDesign:
    objective: float
    x: XMatrix
    kraus: KrausSet
    posteriors: np.ndarray
    trace: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def _feasibility_problem(e, w, povm, basis, delta, eta, floor):
    n, nn = e.dim, len(basis)
    dm = data_matrices(e, w, delta)
    p = SdpProblem()
    p.add_block("X", nn)
    p.add_block("S", n)
    p.add_scalar("s")
    p.set_objective({"s": 1.0})
    p.add_matrix_equality({"X": LinearMap(lambda x: completeness(x, basis),
                                          lambda g: _completeness_adjoint(g, basis)),
                           "S": LinearMap.identity()}, np.eye(n))
    rows = []
    for i in dm.constrained():
        r = hermitian_part(build_R(dm[i], povm[i], basis))
        rows.append(r)
        p.add_inequality({"X": r, "s": -1.0}, 0.0)
    eye = np.eye(nn)
    p.add_inequality({"X": -eye}, -floor)
    if eta is not None:
        p.add_inequality({"X": eye}, float(eta))
    return p, rows


def _range(h, tol):
    w, u = np.linalg.eigh(hermitian_part(h))
    top = max(w[-1], 0.0)
    keep = w > tol * max(top, 1e-300)
    return w[keep], u[:, keep]


def _boundary_step(lam, u, d):
    """Largest alpha keeping diag(lam) + alpha U* D U PSD within the range."""
    if lam.size == 0:
        return np.inf
    s = hermitian_part((u.conj().T @ d @ u) / np.sqrt(np.outer(lam, lam)))
    m = np.linalg.eigvalsh(s)[0]
    return np.inf if m >= 0 else -1.0 / m


def reduce_rank(x, basis: MatrixBasis, rows, tol: float = 1e-7, max_steps: int = 100):
    """Move X along the face that keeps K_0 <= I and every Tr X R_i fixed until its rank stops dropping.

    Each step parameterizes directions D = U W U* inside range(X), together
    with a matching change of the slack I - K_0, solves the linear
    conditions K_0(D) + D_S = 0, Tr D R_i = 0 and Tr D = 0, and walks to the
    PSD boundary. The objective is unchanged throughout.
    """
    n = basis.dim
    x = hermitian_part(x)
    gbasis = hermitian_basis(n)
    for _ in range(max_steps):
        lam, u = _range(x, tol)
        s = np.eye(n) - completeness(x, basis)
        lam_s, us = _range(s, tol)
        r, rs = u.shape[1], us.shape[1]
        hx, hs = hermitian_basis(r), hermitian_basis(rs) if rs else np.zeros((0, 0, 0))
        cols = []
        for h in hx:
            d = u @ h @ u.conj().T
            k0 = completeness(d, basis)
            eqs = [np.sum(g * k0.T).real for g in gbasis]
            eqs += [np.sum(ri * d.T).real for ri in rows]
            eqs.append(np.trace(d).real)
            cols.append(eqs)
        for h in hs:
            d = us @ h @ us.conj().T
            eqs = [np.sum(g * d.T).real for g in gbasis] + [0.0] * (len(rows) + 1)
            cols.append(eqs)
        a = np.array(cols).T
        null = sla.null_space(a, rcond=1e-9)
        if null.shape[1] == 0:
            break
        t = null[:, 0]
        dx = u @ np.tensordot(t[: r * r], hx, axes=1) @ u.conj().T
        if np.linalg.norm(dx) < 1e-12:
            break
        ds = us @ np.tensordot(t[r * r:], hs, axes=1) @ us.conj().T if rs else np.zeros((n, n))
        alpha = min(_boundary_step(lam, u, dx), _boundary_step(lam_s, us, ds))
        if not np.isfinite(alpha):
            dx, ds = -dx, -ds
            alpha = min(_boundary_step(lam, u, dx), _boundary_step(lam_s, us, ds))
        if not np.isfinite(alpha):
            break
        x = hermitian_part(x + alpha * dx)
        w, v = np.linalg.eigh(x)
        w[w < tol * w[-1]] = 0.0
        x = hermitian_part((v * w) @ v.conj().T)
    return x


def solve_fixed_povm_design(e: StateEnsemble, w, povm: Povm, basis: MatrixBasis | None = None,
                            eta: float | None = None, eps: float = 1e-6, floor: float = TRACE_FLOOR,
                            reduce: bool = True, settings: DesignSettings | None = None) -> OsrDesign:
    """Choose the channel in front of a fixed POVM to minimize the worst-case posterior error.

    Bisection on delta with feasibility SDPs in X. ``floor`` keeps Tr X away
    from the trivial X = 0 and ``eta`` optionally caps Tr X as a proxy for
    the number of Kraus operators. With ``reduce`` the final X is moved to a
    low-rank point of the optimal face.
    """
    st = settings or DesignSettings(eps=eps)
    st.eps = eps
    if povm.has_inconclusive or len(povm) != e.count:
        raise ValueError("fixed-POVM channel design needs one POVM element per state")
    basis = basis or standard_basis(e.dim)
    if basis.dim != e.dim:
        raise ValueError("basis dimension does not match the ensemble")
    w = normalize_weights(e, w)
    stats = {"sdp_solves": 0, "iterations": 0}

    def feasible(delta):
        p, rows = _feasibility_problem(e, w, povm, basis, delta, eta, floor)
        sol = solve_feasibility(p, "s", st.sdp)
        stats["sdp_solves"] += 1
        stats["iterations"] += sol.iterations
        if sol.status != "optimal":
            raise SolverFailure(f"channel feasibility SDP at delta={delta:.9g}: {sol.status}", sol.history)
        return sol.scalars["s"] < -st.feas_margin, (sol, rows)

    t0 = time.perf_counter()
    lo, hi, (sol, rows), trace = bisect(feasible, 0.0, 1.0, st.eps)
    feasible_at_one = trace[-1]["feasible"] or any(t["feasible"] for t in trace)
    x = hermitian_part(sol.blocks["X"])
    if reduce:
        x = reduce_rank(x, basis, rows)
    xm = XMatrix(x, basis)
    k0 = xm.completeness()
    flags = {
        "infeasible_at_one": not feasible_at_one,
        "tp_defect": float(np.linalg.norm(k0 - np.eye(e.dim))),
        "completeness_violation": float(max(0.0, np.linalg.eigvalsh(hermitian_part(k0))[-1] - 1.0)),
        "rank": xm.rank(),
    }
    stats["seconds"] = time.perf_counter() - t0
    return OsrDesign(hi, xm, kraus_from_x(x, basis), channel_posteriors(e, povm, x, basis), trace, flags, stats)
