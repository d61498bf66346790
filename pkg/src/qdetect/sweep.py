"""Noise-level sweeps over the binary and inconclusive noise families.

Each grid point designs (or, in robustness mode, only evaluates) a
deterministic detector under nu(nu0) and an inconclusive detector under
nu_incl(nu0). Points are independent and may run in a process pool.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design import (DesignSettings, SolverFailure, solve_wc_posterior, solve_wc_posterior_inconclusive,
                     solve_wc_posterior_noisy)
from .ensemble import StateEnsemble
from .metrics import evaluate
from .povm import NoiseModel, Povm

COLUMNS = ("nu0", "det_p11", "det_p22", "rand_p11", "rand_p22", "p_incl", "status")
FAMILIES = ("both", "binary", "inconclusive")


@dataclass
class SweepRow:
    nu0: float
    det: tuple | None = None
    rand: tuple | None = None
    p_incl: float | None = None
    status: str = "ok"

    def min_det(self) -> float:
        return min(self.det)

    def min_rand(self) -> float:
        return min(self.rand)

    def cells(self) -> list:
        def f(v):
            return "" if v is None or not np.isfinite(v) else f"{v:.6f}"
        det = self.det or (None, None)
        rand = self.rand or (None, None)
        return [f"{self.nu0:.4f}", f(det[0]), f(det[1]), f(rand[0]), f(rand[1]), f(self.p_incl), self.status]


def default_grid(stop: float = 0.20, step: float = 0.02) -> np.ndarray:
    k = int(round(stop / step))
    return np.round(np.arange(k + 1) * step, 10)


def _diag2(report):
    d = report.posterior_diagonal()
    return float(d[0]), float(d[1])


def _point(args) -> SweepRow:
    e, nu0, family, fixed, eps = args
    row = SweepRow(float(nu0))
    errors = []
    st = DesignSettings(eps=eps)
    if family in ("both", "binary"):
        nu = NoiseModel.binary(nu0)
        try:
            if fixed and "binary" in fixed:
                rep = evaluate(fixed["binary"], e, nu)
            else:
                rep = solve_wc_posterior_noisy(e, None, nu, eps=eps, settings=st).report
            row.det = _diag2(rep)
        except SolverFailure as exc:
            errors.append(f"binary: {exc}")
    if family in ("both", "inconclusive"):
        nu = NoiseModel.inconclusive(nu0)
        try:
            if fixed and "inconclusive" in fixed:
                rep = evaluate(fixed["inconclusive"], e, nu)
            else:
                rep = solve_wc_posterior_inconclusive(e, None, eps=eps, nu=nu, settings=DesignSettings(eps=eps)).report
            row.rand = _diag2(rep)
            row.p_incl = float(rep.p_incl)
        except SolverFailure as exc:
            errors.append(f"inconclusive: {exc}")
    if errors:
        row.status = "failed: " + "; ".join(errors).replace(",", ";").replace("\n", " ")
    return row


def zero_noise_povms(e: StateEnsemble, eps: float = 1e-6) -> dict:
    """Designs optimized at nu0 = 0, for evaluating robustness to later noise."""
    return {"binary": solve_wc_posterior(e, eps=eps).povm,
            "inconclusive": solve_wc_posterior_inconclusive(e, eps=eps).povm}


def run_sweep(e: StateEnsemble, grid=None, family: str = "both", fixed: dict | None = None,
              eps: float = 1e-6, workers: int | None = None) -> list[SweepRow]:
    """One row per grid point, ordered as the grid.

    ``fixed`` maps "binary" and/or "inconclusive" to a POVM that is evaluated
    under the noise instead of re-optimized. ``workers`` defaults to the
    number of logical cores; 1 runs in-process.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or np.any(grid >= 0.5):
        raise ValueError("nu0 grid values must lie in [0, 0.5)")
    if fixed:
        for key, p in fixed.items():
            if key not in ("binary", "inconclusive") or not isinstance(p, Povm):
                raise ValueError(f"bad fixed POVM entry {key!r}")
            if p.has_inconclusive != (key == "inconclusive"):
                raise ValueError(f"fixed POVM for {key} has the wrong outcome structure")
    jobs = [(e, nu0, family, fixed, eps) for nu0 in grid]
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) == 1:
        return [_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_point, jobs))


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for r in rows:
        wr.writerow(r.cells())
    return buf.getvalue()
