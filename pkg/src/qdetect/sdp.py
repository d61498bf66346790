"""Small dense SDP solver over complex Hermitian PSD blocks.

Problems are stated in the primal form

    minimize    sum_b Re Tr(C_b X_b) + c . x
    subject to  linear equalities (scalar- or Hermitian-matrix-valued)
                scalar linear inequalities  <=  rhs
                X_b PSD,  x free

and solved with an infeasible primal-dual path-following method using the
HKM search direction and Mehrotra's predictor-corrector. Inequalities get
non-negative slack variables; free scalars are eliminated from the Newton
system through a Schur complement, so they never need splitting.

The dual variables come back attached to the constraints that produced
them: Hermitian Y for matrix equalities, lambda >= 0 for inequalities and
Z_b PSD for each block, satisfying  C_b = A_b^*(y) + Z_b.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla

from .linalg import hermitian_basis, hermitian_part, hermitize

log = logging.getLogger(__name__)


class SdpStructureError(ValueError):
    pass


@dataclass
class SdpSettings:
    feas_tol: float = 1e-9
    gap_tol: float = 1e-9
    # accepted on stall: the advertised contract
    accept_feas: float = 1e-8
    accept_gap: float = 1e-7
    # max_k ||Z_k X_k||_F required at termination; centering steps spent reaching it
    comp_tol: float = 1e-8
    center_steps: int = 8
    # face alignment after convergence when ||ZX|| is still above comp_tol
    polish: bool = True
    polish_max_vars: int = 3000
    max_iter: int = 200
    step_fraction: float = 0.98
    max_dim: int = 4096
    regularization: float = 1e-13


class LinearMap:
    """Real-linear map from a block's Hermitian matrices to Hermitian matrices.

    Only the adjoint is needed to assemble constraints: it must satisfy
    Re Tr(G L(X)) = Re Tr(L*(G) X) for Hermitian G and X.
    """

    def __init__(self, apply: Callable, adjoint: Callable):
        self.apply = apply
        self.adjoint = adjoint

    @classmethod
    def identity(cls, scale: float = 1.0) -> "LinearMap":
        return cls(lambda x: scale * x, lambda g: scale * g)

    @classmethod
    def congruences(cls, pairs) -> "LinearMap":
        """X -> sum_k L_k X R_k (caller guarantees Hermitian output)."""
        pairs = [(np.asarray(lm, complex), np.asarray(rm, complex)) for lm, rm in pairs]
        return cls(
            lambda x: sum(lm @ x @ rm for lm, rm in pairs),
            lambda g: sum(rm @ g @ lm for lm, rm in pairs),
        )


@dataclass
class _Row:
    blocks: dict
    scalars: dict
    rhs: float
    slack: bool = False


class SdpProblem:
    """Builder for an SDP. Terms are dicts keyed by block or scalar name.

    A block term value is a Hermitian matrix C meaning Re Tr(C X); a scalar
    term value is a real coefficient.
    """

    def __init__(self):
        self.blocks: dict[str, int] = {}
        self.scalars: list[str] = []
        self.objective: dict = {}
        self.objective_constant = 0.0
        self.equalities: list = []
        self.inequalities: list = []

    def add_block(self, name: str, n: int) -> str:
        if name in self.blocks or name in self.scalars:
            raise SdpStructureError(f"duplicate variable name {name!r}")
        if int(n) < 1:
            raise SdpStructureError(f"block {name!r} needs positive size")
        self.blocks[name] = int(n)
        return name

    def add_scalar(self, name: str) -> str:
        if name in self.blocks or name in self.scalars:
            raise SdpStructureError(f"duplicate variable name {name!r}")
        self.scalars.append(name)
        return name

    def _check_terms(self, terms: Mapping) -> dict:
        out = {}
        for k, v in terms.items():
            if k in self.blocks:
                n = self.blocks[k]
                c = hermitize(v, name=f"coefficient of {k}")
                if c.shape != (n, n):
                    raise SdpStructureError(f"coefficient of {k!r} has shape {c.shape}, block is {n}x{n}")
                out[k] = c
            elif k in self.scalars:
                out[k] = float(v)
            else:
                raise SdpStructureError(f"unknown variable {k!r}")
        return out

    def set_objective(self, terms: Mapping, constant: float = 0.0):
        self.objective = self._check_terms(terms)
        self.objective_constant = float(constant)

    def add_equality(self, terms: Mapping, rhs: float):
        self.equalities.append(("scalar", self._check_terms(terms), float(rhs)))
        return len(self.equalities) - 1

    def add_matrix_equality(self, terms: Mapping, rhs):
        """sum_b L_b(X_b) + sum_s a_s x_s = RHS for Hermitian RHS.

        Block terms are ``LinearMap`` objects; scalar terms are Hermitian
        matrices multiplying the scalar.
        """
        rhs = hermitize(rhs, name="matrix equality rhs")
        for k, v in terms.items():
            if k in self.blocks:
                if not isinstance(v, LinearMap):
                    raise SdpStructureError(f"matrix-equality term for block {k!r} must be a LinearMap")
            elif k in self.scalars:
                if np.asarray(v).shape != rhs.shape:
                    raise SdpStructureError(f"scalar term {k!r} has wrong shape")
            else:
                raise SdpStructureError(f"unknown variable {k!r}")
        self.equalities.append(("matrix", dict(terms), rhs))
        return len(self.equalities) - 1

    def add_inequality(self, terms: Mapping, rhs: float):
        self.inequalities.append((self._check_terms(terms), float(rhs)))
        return len(self.inequalities) - 1

    def num_real_dims(self) -> int:
        return sum(n * n for n in self.blocks.values()) + len(self.scalars) + len(self.inequalities)


@dataclass
class SdpSolution:
    status: str
    blocks: dict
    scalars: dict
    dual_eq: list
    dual_psd: dict
    dual_ineq: np.ndarray
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    complementarity: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    condition: float = float("nan")
    feasible: bool | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Standard:
    """Compiled standard form: rows over blocks, free scalars and LP slacks."""

    def __init__(self, prob: SdpProblem):
        self.names = list(prob.blocks)
        self.sizes = [prob.blocks[k] for k in self.names]
        self.free = list(prob.scalars)
        rows: list[_Row] = []
        self.eq_rows = []
        for kind, terms, rhs in prob.equalities:
            if kind == "scalar":
                self.eq_rows.append(("scalar", [len(rows)]))
                rows.append(_Row({k: v for k, v in terms.items() if k in prob.blocks},
                                 {k: v for k, v in terms.items() if k in prob.scalars}, rhs))
            else:
                n = rhs.shape[0]
                basis = hermitian_basis(n)
                idx = []
                for g in basis:
                    bl = {k: hermitian_part(v.adjoint(g)) for k, v in terms.items() if k in prob.blocks}
                    sc = {k: float(np.sum(g * np.asarray(v).T).real) for k, v in terms.items() if k in prob.scalars}
                    idx.append(len(rows))
                    rows.append(_Row(bl, sc, float(np.sum(g * rhs.T).real)))
                self.eq_rows.append(("matrix", idx, basis))
        self.ineq_rows = []
        for terms, rhs in prob.inequalities:
            self.ineq_rows.append(len(rows))
            rows.append(_Row({k: v for k, v in terms.items() if k in prob.blocks},
                             {k: v for k, v in terms.items() if k in prob.scalars}, rhs, slack=True))
        p = len(rows)
        self.p = p
        self.b = np.array([r.rhs for r in rows])
        self.F = []
        for name, n in zip(self.names, self.sizes):
            f = np.zeros((p, n, n), dtype=complex)
            for i, r in enumerate(rows):
                if name in r.blocks:
                    f[i] = r.blocks[name]
            self.F.append(f)
        self.Af = np.zeros((p, len(self.free)))
        for i, r in enumerate(rows):
            for j, s in enumerate(self.free):
                self.Af[i, j] = r.scalars.get(s, 0.0)
        self.l = len(self.ineq_rows)
        self.Al = np.zeros((p, self.l))
        for j, i in enumerate(self.ineq_rows):
            self.Al[i, j] = 1.0
        self.C = [prob.objective.get(k, np.zeros((n, n), complex)) for k, n in zip(self.names, self.sizes)]
        self.C = [np.asarray(c, dtype=complex) for c in self.C]
        self.cf = np.array([prob.objective.get(s, 0.0) for s in self.free])
        self.cl = np.zeros(self.l)
        self.const = prob.objective_constant
        self.Fflat = [f.reshape(p, -1) for f in self.F]

    def A(self, X, xl, xf):
        out = self.Al @ xl + self.Af @ xf
        for fl, x in zip(self.Fflat, X):
            out = out + (fl.conj() @ x.reshape(-1)).real
        return out

    def AT(self, y):
        return [hermitian_part(np.tensordot(y, f, axes=1)) for f in self.F], self.Al.T @ y, self.Af.T @ y


def _inner(a, b) -> float:
    return float(np.sum(a.conj() * b).real)


def _max_step(x, dx) -> float:
    """Largest alpha with x + alpha dx PSD (x positive definite)."""
    try:
        lch = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    linv = sla.solve_triangular(lch, np.eye(x.shape[0]), lower=True)
    s = hermitian_part(linv @ dx @ linv.conj().T)
    lam = np.linalg.eigvalsh(s)[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x, dx) -> float:
    neg = dx < 0
    if not neg.any():
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve(prob: SdpProblem, settings: SdpSettings | None = None) -> SdpSolution:
    st = settings or SdpSettings()
    if prob.num_real_dims() > st.max_dim:
        raise SdpStructureError(f"problem has {prob.num_real_dims()} real dimensions, limit is {st.max_dim}")
    if not prob.equalities and not prob.inequalities:
        raise SdpStructureError("problem has no constraints")
    sf = _Standard(prob)
    return _ipm(sf, st)


def solve_feasibility(prob: SdpProblem, slack: str = "s", settings: SdpSettings | None = None) -> SdpSolution:
    """Solve ``minimize s`` and mark the solution feasible when s_opt <= 0."""
    if slack not in prob.scalars:
        raise SdpStructureError(f"slack scalar {slack!r} is not a variable")
    obj = prob.objective
    if set(obj) != {slack} or obj[slack] != 1.0:
        raise SdpStructureError("feasibility problems must minimize exactly the slack scalar")
    sol = solve(prob, settings)
    sol.feasible = bool(sol.scalars[slack] <= 0.0)
    return sol


def _ipm(sf: _Standard, st: SdpSettings) -> SdpSolution:
    p, nb = sf.p, len(sf.sizes)
    b, Af, Al = sf.b, sf.Af, sf.Al
    f, l = Af.shape[1], sf.l

    normb = 1.0 + np.linalg.norm(b)
    normc = 1.0 + np.sqrt(sum(_inner(c, c) for c in sf.C) + sf.cf @ sf.cf)
    nu_total = sum(sf.sizes) + l

    # starting point scaled to the data
    X, Z = [], []
    for fb, cb, n in zip(sf.F, sf.C, sf.sizes):
        fnorm = np.linalg.norm(fb.reshape(p, -1), axis=1)
        xi = max(10.0, np.sqrt(n), n * np.max((1 + np.abs(b)) / (1 + fnorm)))
        zeta = max(10.0, np.sqrt(n), fnorm.max(), np.linalg.norm(cb))
        X.append(xi * np.eye(n, dtype=complex))
        Z.append(zeta * np.eye(n, dtype=complex))
    xl = np.full(l, max(10.0, np.max(1 + np.abs(b)) if p else 10.0))
    zl = np.full(l, 10.0)
    xf = np.zeros(f)
    y = np.zeros(p)

    history = []
    status = "max_iter"
    best = None
    stall = 0
    centering = 0
    prev_mu = np.inf
    cond = float("nan")

    for it in range(st.max_iter + 1):
        ATy, ATy_l, ATy_f = sf.AT(y)
        rp = b - sf.A(X, xl, xf)
        Rd = [hermitian_part(c - z - a) for c, z, a in zip(sf.C, Z, ATy)]
        rdl = sf.cl - zl - ATy_l
        rdf = sf.cf - ATy_f
        pobj = sum(_inner(c, x) for c, x in zip(sf.C, X)) + sf.cl @ xl + sf.cf @ xf
        dobj = float(b @ y)
        comp = sum(_inner(x, z) for x, z in zip(X, Z)) + xl @ zl
        mu = comp / nu_total
        relp = np.linalg.norm(rp) / normb
        reld = np.sqrt(sum(_inner(r, r) for r in Rd) + rdl @ rdl + rdf @ rdf) / normc
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        relcomp = comp / (1 + abs(pobj) + abs(dobj))
        zx = max([float(np.linalg.norm(z @ x)) for x, z in zip(X, Z)], default=0.0)
        history.append({"iter": it, "pobj": pobj, "dobj": dobj, "relp": relp, "reld": reld,
                        "relgap": relgap, "mu": mu, "zx": zx})

        # acceptable iterates first, then the smallest residual with zx as a soft term
        acceptable = (relp <= st.accept_feas and reld <= st.accept_feas
                      and abs(pobj - dobj) <= st.accept_gap * (1 + abs(pobj)))
        score = (not acceptable, max(relp, reld, relgap, relcomp, 1e-2 * zx))
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in X], xl.copy(), xf.copy(), y.copy(),
                    [z.copy() for z in Z], zl.copy(), it)

        # centering holds mu fixed, so the gap test is relaxed once it starts
        gtol = st.gap_tol * (10.0 if centering else 1.0)
        converged = relp <= st.feas_tol and reld <= st.feas_tol and relgap <= gtol and relcomp <= gtol
        if converged and (zx <= st.comp_tol or centering >= st.center_steps):
            status = "optimal"
            break
        if converged:
            centering += 1

        # infeasibility certificates along diverging iterates
        if dobj > 0:
            ray = np.sqrt(sum(_inner(a + z, a + z) for a, z in zip(ATy, Z)) + np.sum((ATy_l + zl) ** 2)
                          + ATy_f @ ATy_f)
            if ray / dobj < 1e-8 and dobj > 1e6 * normc:
                status = "infeasible"
                break
        if pobj < 0:
            axn = np.linalg.norm(sf.A(X, xl, xf))
            if axn / -pobj < 1e-8 and -pobj > 1e6 * normb:
                status = "unbounded"
                break
        if it == st.max_iter:
            break

        if mu > 0.9 * prev_mu and it > 5:
            stall += 1
        else:
            stall = 0
        prev_mu = mu
        if stall >= 8 or it - best[-1] >= 6:
            break

        try:
            Zinv = [np.linalg.inv(z) for z in Z]
        except np.linalg.LinAlgError:
            break
        M = np.zeros((p, p))
        for fb, fl, zi, x in zip(sf.F, sf.Fflat, Zinv, X):
            t = zi[None, :, :] @ fb @ x[None, :, :]
            M += (fl @ t.transpose(0, 2, 1).reshape(p, -1).T).real
        if l:
            M += (Al * (xl / zl)) @ Al.T
        M = 0.5 * (M + M.T)
        try:
            try:
                factor = sla.cho_factor(M, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                M[np.diag_indices(p)] += st.regularization * max(1.0, np.max(np.abs(np.diag(M))))
                factor = sla.cho_factor(M, lower=True, check_finite=False)
            solveM = lambda r: sla.cho_solve(factor, r, check_finite=False)
            dg = np.diag(factor[0]) ** 2
            cond = float(dg.max() / max(dg.min(), 1e-300))
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(M, check_finite=False)
            solveM = lambda r: sla.lu_solve(lu, r, check_finite=False)
            cond = float("inf")
        if f:
            MinvAf = solveM(Af)
            S = Af.T @ MinvAf
            S = 0.5 * (S + S.T)

        def direction(target, corr):
            H = []
            for k in range(nb):
                R = target * np.eye(sf.sizes[k]) - Z[k] @ X[k]
                if corr is not None:
                    R = R - corr[1][k] @ corr[0][k]
                H.append(hermitian_part(Zinv[k] @ R - Zinv[k] @ Rd[k] @ X[k]))
            Rl = target - xl * zl
            if corr is not None:
                Rl = Rl - corr[3] * corr[2]
            Hl = (Rl - xl * rdl) / zl
            def reduced(r1, r2):
                if f:
                    t = solveM(r1)
                    dxf = np.linalg.solve(S, Af.T @ t - r2)
                    return t - MinvAf @ dxf, dxf
                return solveM(r1), np.zeros(0)

            def expand(dy):
                ATdy, ATdy_l, _ = sf.AT(dy)
                dX = [H[k] + hermitian_part(Zinv[k] @ ATdy[k] @ X[k]) for k in range(nb)]
                return dX, Hl + (xl / zl) * ATdy_l

            dy, dxf = reduced(rp - sf.A(H, Hl, np.zeros(f)), rdf)
            dX, dxl = expand(dy)
            # one refinement step against the exact operator
            r1 = rp - sf.A(dX, dxl, dxf)
            r2 = rdf - Af.T @ dy
            ddy, ddxf = reduced(r1, r2)
            dy, dxf = dy + ddy, dxf + ddxf
            dX, dxl = expand(dy)
            ATdy, ATdy_l, _ = sf.AT(dy)
            dZ = [Rd[k] - ATdy[k] for k in range(nb)]
            dzl = rdl - ATdy_l
            return dX, dZ, dxl, dzl, dxf, dy

        def steps(d):
            dX, dZ, dxl, dzl = d[:4]
            ap = min([_max_step(X[k], dX[k]) for k in range(nb)] + [_max_step_lp(xl, dxl)])
            ad = min([_max_step(Z[k], dZ[k]) for k in range(nb)] + [_max_step_lp(zl, dzl)])
            return ap, ad

        if centering:
            # pure centering at the current mu realigns the eigenvectors of X and Z
            d = direction(mu, None)
            ap, ad = steps(d)
            ap = min(1.0, st.step_fraction * ap)
            ad = min(1.0, st.step_fraction * ad)
            dX, dZ, dxl, dzl, dxf, dy = d
            X = [hermitian_part(X[k] + ap * dX[k]) for k in range(nb)]
            xl, xf = xl + ap * dxl, xf + ap * dxf
            Z = [hermitian_part(Z[k] + ad * dZ[k]) for k in range(nb)]
            zl, y = zl + ad * dzl, y + ad * dy
            continue

        aff = direction(0.0, None)
        ap, ad = steps(aff)
        ap, ad = min(1.0, ap), min(1.0, ad)
        comp_aff = sum(_inner(X[k] + ap * aff[0][k], Z[k] + ad * aff[1][k]) for k in range(nb))
        comp_aff += (xl + ap * aff[2]) @ (zl + ad * aff[3])
        sigma = min(1.0, max(0.0, (comp_aff / comp) ** 3)) if comp > 0 else 0.0

        d = direction(sigma * mu, (aff[0], aff[1], aff[2], aff[3]))
        ap, ad = steps(d)
        ap = min(1.0, st.step_fraction * ap)
        ad = min(1.0, st.step_fraction * ad)
        dX, dZ, dxl, dzl, dxf, dy = d
        X = [hermitian_part(X[k] + ap * dX[k]) for k in range(nb)]
        xl = xl + ap * dxl
        xf = xf + ap * dxf
        Z = [hermitian_part(Z[k] + ad * dZ[k]) for k in range(nb)]
        zl = zl + ad * dzl
        y = y + ad * dy

        if max(max((np.abs(x).max() for x in X), default=0), np.abs(y).max(initial=0)) > 1e14:
            break

    if status not in ("optimal", "infeasible", "unbounded"):
        _, X, xl, xf, y, Z, zl, _ = best
        ATy, ATy_l, ATy_f = sf.AT(y)
        rp = b - sf.A(X, xl, xf)
        Rd = [hermitian_part(c - z - a) for c, z, a in zip(sf.C, Z, ATy)]
        pobj = sum(_inner(c, x) for c, x in zip(sf.C, X)) + sf.cl @ xl + sf.cf @ xf
        dobj = float(b @ y)
        relp = np.linalg.norm(rp) / normb
        reld = np.sqrt(sum(_inner(r, r) for r in Rd) + np.sum((sf.cl - zl - ATy_l) ** 2)
                       + np.sum((sf.cf - ATy_f) ** 2)) / normc
        if relp <= st.accept_feas and reld <= st.accept_feas and abs(pobj - dobj) <= st.accept_gap * (1 + abs(pobj)):
            status = "optimal"
        log.debug("sdp stalled at iter %d, status %s", len(history), status)

    if status == "optimal" and st.polish:
        zx = max([float(np.linalg.norm(z @ x)) for x, z in zip(X, Z)], default=0.0)
        if zx > st.comp_tol:
            out = _polish(sf, st, X, xl, xf, y, Z, zl, normb, normc)
            if out is not None:
                X, xl, xf, y, Z, zl = out
                history.append({"iter": len(history), "polish": True, "zx_before": zx})

    return _package(sf, status, X, xl, xf, y, Z, zl, history, cond, normb, normc)


def _measures(sf, X, xl, xf, y, Z, zl, normb, normc):
    ATy, ATy_l, ATy_f = sf.AT(y)
    rp = sf.b - sf.A(X, xl, xf)
    Rd = [hermitian_part(c - z - a) for c, z, a in zip(sf.C, Z, ATy)]
    pobj = sum(_inner(c, x) for c, x in zip(sf.C, X)) + sf.cl @ xl + sf.cf @ xf
    relp = np.linalg.norm(rp) / normb
    reld = np.sqrt(sum(_inner(r, r) for r in Rd) + np.sum((sf.cl - zl - ATy_l) ** 2)
                   + np.sum((sf.cf - ATy_f) ** 2)) / normc
    gap = abs(pobj - float(sf.b @ y)) / (1 + abs(pobj))
    zx = max([float(np.linalg.norm(z @ x)) for x, z in zip(X, Z)], default=0.0)
    return relp, reld, gap, zx


def _polish(sf, st, X, xl, xf, y, Z, zl, normb, normc):
    """Newton steps on the optimality system with XZ + ZX = 0.

    Near a strictly complementary solution this system is well conditioned,
    unlike the path-following steps whose Z^-1 sees eigenvalues of order mu.
    The dense Jacobian is built in Hermitian-basis coordinates and solved by
    least squares. Returns None unless every residual stays within its previous
    value (or tolerance) and ||ZX|| drops.
    """
    nb, p, l, f = len(sf.sizes), sf.p, sf.l, len(sf.free)
    bases = [hermitian_basis(n) for n in sf.sizes]
    flat = [g.reshape(g.shape[0], -1).conj() for g in bases]
    nvar = 2 * sum(n * n for n in sf.sizes) + 2 * l + f + p
    if nvar > st.polish_max_vars:
        return None

    def coords(k, m):
        return (flat[k] @ m.reshape(-1)).real

    def residual(X, xl, xf, y, Z, zl):
        ATy, ATy_l, ATy_f = sf.AT(y)
        parts = [sf.b - sf.A(X, xl, xf)]
        parts += [coords(k, sf.C[k] - Z[k] - ATy[k]) for k in range(nb)]
        parts += [sf.cl - zl - ATy_l, sf.cf - ATy_f]
        parts += [coords(k, -(X[k] @ Z[k] + Z[k] @ X[k]) / 2) for k in range(nb)]
        parts += [-xl * zl]
        return np.concatenate(parts)

    def unpack(v):
        out, pos = [], 0
        for group in ("X", "Z"):
            mats = []
            for k, n in enumerate(sf.sizes):
                mats.append(np.tensordot(v[pos:pos + n * n], bases[k], axes=1))
                pos += n * n
            out.append(mats)
        dxl, dzl = v[pos:pos + l], v[pos + l:pos + 2 * l]
        pos += 2 * l
        return out[0], out[1], dxl, dzl, v[pos:pos + f], v[pos + f:]

    def jacobian(X, xl, Z, zl):
        cols = []
        for j in range(nvar):
            e = np.zeros(nvar)
            e[j] = 1.0
            dX, dZ, dxl, dzl, dxf, dy = unpack(e)
            ATdy, ATdy_l, ATdy_f = sf.AT(dy)
            parts = [sf.A(dX, dxl, dxf)]
            parts += [coords(k, dZ[k] + ATdy[k]) for k in range(nb)]
            parts += [dzl + ATdy_l, ATdy_f]
            parts += [coords(k, (dX[k] @ Z[k] + Z[k] @ dX[k] + X[k] @ dZ[k] + dZ[k] @ X[k]) / 2)
                      for k in range(nb)]
            parts += [zl * dxl + xl * dzl]
            cols.append(np.concatenate(parts))
        return np.array(cols).T

    def clip(m):
        w, u = np.linalg.eigh(hermitian_part(m))
        return hermitian_part((u * np.maximum(w, 0.0)) @ u.conj().T)

    old = _measures(sf, X, xl, xf, y, Z, zl, normb, normc)
    cur = (X, xl, xf, y, Z, zl)
    best, best_zx = None, old[3]
    for _ in range(4):
        X, xl, xf, y, Z, zl = cur
        d = np.linalg.lstsq(jacobian(X, xl, Z, zl), residual(*cur), rcond=None)[0]
        dX, dZ, dxl, dzl, dxf, dy = unpack(d)
        cur = ([clip(X[k] + dX[k]) for k in range(nb)], np.maximum(xl + dxl, 0.0), xf + dxf, y + dy,
               [clip(Z[k] + dZ[k]) for k in range(nb)], np.maximum(zl + dzl, 0.0))
        new = _measures(sf, *cur, normb, normc)
        if (new[0] <= max(old[0], st.feas_tol) and new[1] <= max(old[1], st.feas_tol)
                and new[2] <= max(old[2], st.gap_tol) and new[3] < best_zx):
            best, best_zx = cur, new[3]
            if best_zx <= 1e-2 * st.comp_tol:
                break
    if best is None:
        log.debug("polish rejected at %s", old)
    return best


def _package(sf, status, X, xl, xf, y, Z, zl, history, cond, normb, normc):
    pobj = sum(_inner(c, x) for c, x in zip(sf.C, X)) + sf.cl @ xl + sf.cf @ xf
    dobj = float(sf.b @ y)
    ATy, ATy_l, ATy_f = sf.AT(y)
    rp = sf.b - sf.A(X, xl, xf)
    Rd = [hermitian_part(c - z - a) for c, z, a in zip(sf.C, Z, ATy)]
    dres = np.sqrt(sum(_inner(r, r) for r in Rd) + np.sum((sf.cl - zl - ATy_l) ** 2)
                   + np.sum((sf.cf - ATy_f) ** 2))
    dual_eq = []
    for entry in sf.eq_rows:
        if entry[0] == "scalar":
            dual_eq.append(float(y[entry[1][0]]))
        else:
            dual_eq.append(hermitian_part(np.tensordot(y[entry[1]], entry[2], axes=1)))
    comp = {name: float(np.linalg.norm(z @ x)) for name, x, z in zip(sf.names, X, Z)}
    return SdpSolution(
        status=status,
        blocks={name: x for name, x in zip(sf.names, X)},
        scalars={name: float(v) for name, v in zip(sf.free, xf)},
        dual_eq=dual_eq,
        dual_psd={name: z for name, z in zip(sf.names, Z)},
        dual_ineq=np.asarray(zl, dtype=float),
        objective=float(pobj + sf.const),
        dual_objective=float(dobj + sf.const),
        gap=float(pobj - dobj),
        primal_residual=float(np.linalg.norm(rp)),
        dual_residual=float(dres),
        iterations=len(history) - 1,
        complementarity=comp,
        history=history,
        condition=cond,
    )
