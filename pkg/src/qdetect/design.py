"""Detector design: average joint error and worst-case posterior error.

The worst-case posterior problem is quasiconvex in the POVM. It is solved by
bisection on delta, where each step asks whether some POVM satisfies
Tr O_i A_i(delta) <= 0 for every weighted state. That question is answered
by the feasibility SDP  min s  s.t.  Tr O_i A_i(delta) <= s.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certify import Certificate, certify_avg_joint, certify_wc_posterior
from .datamat import (avg_joint_matrices, data_matrices, noise_matrix, normalize_weights,
                      outcome_index)
from .ensemble import StateEnsemble
from .metrics import ProbReport, evaluate
from .povm import NoiseModel, Povm
from .sdp import LinearMap, SdpProblem, SdpSettings, SdpSolution, solve, solve_feasibility

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    """The SDP engine did not reach an optimal status."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history or []


@dataclass
class DesignSettings:
    eps: float = 1e-6
    # s_opt must fall below -margin for delta to count as feasible
    feas_margin: float = 1e-9
    cert_tol: float | None = None
    # secant steps after bisection move delta to within ~1e-8 of the root
    refine: bool = True
    sdp: SdpSettings = field(default_factory=SdpSettings)

    def certificate_tol(self) -> float:
        return self.cert_tol if self.cert_tol is not None else max(1e-6, 10 * self.eps)


@dataclass(eq=False)
class DesignReport:
    criterion: str
    objective: float
    povm: Povm
    report: ProbReport
    weights: np.ndarray
    gamma: float | None = None
    multipliers: np.ndarray | None = None
    certificate: Certificate | None = None
    trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    noise: NoiseModel | None = None
    # Tr O_0 rho for the designed (noise-free) inconclusive element
    p_incl: float | None = None

    @property
    def posterior_diagonal(self) -> np.ndarray:
        return self.report.posterior_diagonal()

    @property
    def p_incl_observed(self):
        """Probability of observing the inconclusive outcome, noise included."""
        return self.report.p_incl


def _check_sol(sol: SdpSolution, what: str):
    if sol.status != "optimal":
        raise SolverFailure(f"{what}: SDP status {sol.status} after {sol.iterations} iterations",
                            sol.history)


def _povm_problem(n: int, k: int) -> tuple[SdpProblem, list]:
    p = SdpProblem()
    names = [p.add_block(f"O{j}", n) for j in range(k)]
    p.add_matrix_equality({nm: LinearMap.identity() for nm in names}, np.eye(n))
    return p, names


def solve_avg_joint(e: StateEnsemble, w=None, settings: DesignSettings | None = None) -> DesignReport:
    """Minimize sum_i w_i Tr O_i (rho - p_i rho_i) over POVMs."""
    st = settings or DesignSettings()
    w = normalize_weights(e, w)
    a = avg_joint_matrices(e, w)
    p, names = _povm_problem(e.dim, e.count)
    p.set_objective({nm: ai for nm, ai in zip(names, a)})
    t0 = time.perf_counter()
    sol = solve(p, st.sdp)
    _check_sol(sol, "average joint design")
    povm = Povm(tuple(sol.blocks[nm] for nm in names), check=False)
    report = evaluate(povm, e, weights=w)
    cert = certify_avg_joint(povm, e, w, tol=st.certificate_tol())
    diag = {"iterations": sol.iterations, "gap": sol.gap, "dual_objective": sol.dual_objective,
            "condition": sol.condition, "seconds": time.perf_counter() - t0, "sdp_solves": 1,
            "Y": sol.dual_eq[0]}
    return DesignReport("avg-joint", sol.objective, povm, report, w, certificate=cert, diagnostics=diag)


def bisect(feasible: Callable[[float], tuple], lo: float, hi: float, eps: float):
    """Bisection on a monotone feasibility oracle.

    ``feasible(delta)`` returns ``(ok, payload)``. Returns
    ``(lo, hi, payload_at_hi, trace)`` with hi - lo <= eps; ``payload_at_hi``
    comes from the last feasible query, or from querying ``hi`` itself if
    no midpoint was feasible.
    """
    trace = []
    ok, payload = feasible(lo)
    trace.append({"delta": lo, "feasible": ok, "lo": lo, "hi": hi})
    if ok:
        return lo, lo, payload, trace
    best = None
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        ok, pl = feasible(mid)
        if ok:
            hi, best = mid, pl
        else:
            lo = mid
        trace.append({"delta": mid, "feasible": ok, "lo": lo, "hi": hi})
    if best is None:
        ok, best = feasible(hi)
        trace.append({"delta": hi, "feasible": ok, "lo": lo, "hi": hi})
    return lo, hi, best, trace


def refine_root(feasible, s_at: dict, lo: float, hi: float, payload, margin: float, trace: list,
                steps: int = 6):
    """Illinois-type regula falsi on s(delta) after bisection.

    s is decreasing in delta with its root in [lo, hi]. Each step aims at
    s = -10 margin, just on the feasible side, and tightens the bracket; an
    endpoint kept twice in a row has its value halved so curvature cannot
    stall one side. Stops once s(hi) lies within 30 margins of zero. A bracket
    that still touches delta = 0 is left alone: the optimum may sit on that
    boundary, where a smaller delta only weakens the pull on a degenerate face.
    """
    if lo <= 0.0:
        return lo, hi, payload
    f_lo, f_hi = s_at.get(lo), s_at.get(hi)
    if f_lo is None or f_hi is None:
        return lo, hi, payload
    g_lo, g_hi = f_lo + 10 * margin, f_hi + 10 * margin
    side = 0
    for _ in range(steps):
        if not g_lo > 0 > g_hi or f_hi >= -30 * margin:
            break
        t = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not lo < t < hi:
            break
        ok, pl = feasible(t)
        g_t = s_at[t] + 10 * margin if t in s_at else None
        if ok:
            hi, payload = t, pl
            f_hi = s_at.get(t, -20 * margin)
            g_hi = g_t if g_t is not None else -10 * margin
            if side == 1:
                g_lo /= 2
            side = 1
        else:
            lo = t
            g_lo = g_t if g_t is not None else g_lo / 2
            if side == -1:
                g_hi /= 2
            side = -1
        trace.append({"delta": t, "feasible": ok, "lo": lo, "hi": hi, "refine": True})
    return lo, hi, payload


def wc_feasibility_problem(e: StateEnsemble, w, delta: float, nu_mat: np.ndarray, inconclusive: bool):
    """Feasibility SDP at ``delta``; returns (problem, element names, constrained states)."""
    k = nu_mat.shape[1]
    dm = data_matrices(e, w, delta)
    p, names = _povm_problem(e.dim, k)
    p.add_scalar("s")
    p.set_objective({"s": 1.0})
    rows = dm.constrained()
    for i in rows:
        row = nu_mat[outcome_index(i, inconclusive)]
        terms = {names[j]: row[j] * dm[i] for j in range(k) if row[j] != 0}
        terms["s"] = -1.0
        p.add_inequality(terms, 0.0)
    return p, names, rows


def _solve_wc(criterion, e, w, nu, inconclusive, settings) -> DesignReport:
    st = settings or DesignSettings()
    w = normalize_weights(e, w)
    k = e.count + (1 if inconclusive else 0)
    nu_mat = noise_matrix(nu, k, e.count, inconclusive)
    noise = None if nu is None else (nu if isinstance(nu, NoiseModel) else NoiseModel(nu_mat))
    stats = {"sdp_solves": 0, "iterations": 0, "max_gap": 0.0, "max_condition": 0.0}
    s_at = {}

    def feasible(delta):
        p, names, rows = wc_feasibility_problem(e, w, delta, nu_mat, inconclusive)
        sol = solve_feasibility(p, "s", st.sdp)
        stats["sdp_solves"] += 1
        stats["iterations"] += sol.iterations
        _check_sol(sol, f"feasibility SDP at delta={delta:.9g}")
        stats["max_gap"] = max(stats["max_gap"], abs(sol.gap))
        stats["max_condition"] = max(stats["max_condition"], sol.condition)
        ok = sol.scalars["s"] < -st.feas_margin
        s_at[delta] = sol.scalars["s"]
        log.debug("delta=%.9f s=%.3e feasible=%s", delta, sol.scalars["s"], ok)
        return ok, (sol, names, rows)

    t0 = time.perf_counter()
    lo, hi, payload, trace = bisect(feasible, 0.0, 1.0, st.eps)
    if st.refine:
        lo, hi, payload = refine_root(feasible, s_at, lo, hi, payload, st.feas_margin, trace)
    sol, names, rows = payload
    povm = Povm(tuple(sol.blocks[nm] for nm in names), has_inconclusive=inconclusive, check=False)
    report = evaluate(povm, e, noise, weights=w)

    lam = np.zeros(e.count)
    lam[rows] = sol.dual_ineq
    if lam.sum() > 0:
        lam = lam / lam.sum()
    tol = st.certificate_tol()
    cert = certify_wc_posterior(povm, e, w, delta=hi, lam=lam, nu=nu, tol=tol)
    if not cert.passed:
        alt = certify_wc_posterior(povm, e, w, delta=hi, lam=None, nu=nu, tol=tol)
        if alt.passed or max(alt.residuals.values()) < max(cert.residuals.values()):
            cert = alt
    stats.update({"seconds": time.perf_counter() - t0, "delta_lo": lo, "delta_hi": hi,
                  "s_opt": sol.scalars["s"], "final_gap": sol.gap})
    p_incl = float(np.trace(povm[0] @ e.mixture()).real) if inconclusive else None
    return DesignReport(criterion, hi, povm, report, w, gamma=1.0 - hi, multipliers=cert.multipliers,
                        certificate=cert, trace=trace, diagnostics=stats, noise=noise, p_incl=p_incl)


def solve_wc_posterior(e: StateEnsemble, w=None, eps: float = 1e-6,
                       settings: DesignSettings | None = None) -> DesignReport:
    """Minimize max_i w_i (1 - P(state i | outcome i)) over POVMs."""
    st = settings or DesignSettings(eps=eps)
    st.eps = eps
    return _solve_wc("wc-posterior", e, w, None, False, st)


def solve_wc_posterior_noisy(e: StateEnsemble, w, nu, eps: float = 1e-6,
                             settings: DesignSettings | None = None) -> DesignReport:
    """Worst-case posterior design when outcome j is reported as i with probability nu[i, j].

    The design variables stay the noise-free elements; the objective uses
    O_i^noisy = sum_j nu_ij O_j.
    """
    st = settings or DesignSettings(eps=eps)
    st.eps = eps
    return _solve_wc("wc-posterior-noisy", e, w, nu, False, st)


def solve_wc_posterior_inconclusive(e: StateEnsemble, w=None, eps: float = 1e-6, nu=None,
                                    settings: DesignSettings | None = None) -> DesignReport:
    """Worst-case posterior design with an extra inconclusive element O_0.

    Only the m conclusive outcomes are constrained. ``p_incl`` is Tr O_0 rho
    for the designed element; with ``nu`` the probability of observing the
    inconclusive outcome is ``p_incl_observed``.
    """
    st = settings or DesignSettings(eps=eps)
    st.eps = eps
    return _solve_wc("wc-posterior-inconclusive", e, w, nu, True, st)
