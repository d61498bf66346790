"""Probability matrices, error vectors and weighted norms for a (POVM, ensemble) pair."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensemble import StateEnsemble
from .povm import NoiseModel, Povm, noisy_povm

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProbReport:
    """All detector statistics.

    ``conditional[k, j]`` is P(outcome k | state j) over every POVM outcome;
    ``posterior[j, k]`` is P(state j | outcome k) with outcomes as columns and
    NaN in columns whose outcome has probability <= 1e-12. Error vectors are
    indexed by state and use the matched outcome for each state.
    """

    conditional: np.ndarray
    output_dist: np.ndarray
    joint: np.ndarray
    posterior: np.ndarray
    e_joint: np.ndarray
    e_cond: np.ndarray
    e_post: np.ndarray
    matched: tuple
    p_incl: float | None = None
    degenerate: tuple = ()
    norms: dict = field(default_factory=dict)

    def posterior_diagonal(self) -> np.ndarray:
        """P(state i | declared i) for every state."""
        return np.array([self.posterior[i, k] for i, k in enumerate(self.matched)])


def evaluate(povm: Povm, e: StateEnsemble, noise: NoiseModel | None = None, weights=None) -> ProbReport:
    if povm.dim != e.dim:
        raise ValueError(f"POVM dimension {povm.dim} does not match ensemble dimension {e.dim}")
    if noise is not None:
        povm = noisy_povm(noise, povm)
    m = e.count
    offset = 1 if povm.has_inconclusive else 0
    if len(povm) - offset < m:
        raise ValueError(f"POVM has {len(povm) - offset} conclusive outcomes for {m} states")

    elements = np.asarray(povm.elements)
    states = np.asarray(e.states)
    # Tr(O_k rho_j)
    cond = np.einsum("kab,jba->kj", elements, states).real
    joint = cond * e.priors[None, :]
    p_out = joint.sum(axis=1)
    degenerate = tuple(int(k) for k in np.flatnonzero(p_out <= DEGENERATE_TOL))
    posterior = np.full((m, len(povm)), np.nan)
    ok = p_out > DEGENERATE_TOL
    posterior[:, ok] = (joint[ok] / p_out[ok, None]).T

    matched = tuple(i + offset for i in range(m))
    idx = np.array(matched)
    diag_joint = joint[idx, np.arange(m)]
    e_joint = p_out[idx] - diag_joint
    e_cond = 1.0 - cond[idx, np.arange(m)]
    e_post = np.full(m, np.nan)
    good = p_out[idx] > DEGENERATE_TOL
    e_post[good] = 1.0 - diag_joint[good] / p_out[idx][good]

    p_incl = float(p_out[0]) if povm.has_inconclusive else None
    report = ProbReport(cond, p_out, joint, posterior, e_joint, e_cond, e_post, matched, p_incl,
                        tuple(k for k in degenerate if k in matched))
    w = e.normalized_weights if weights is None else np.asarray(weights, dtype=float)
    object.__setattr__(report, "norms", weighted_norms(report, w))
    return report


def _wc(values, w):
    mask = w > 0
    if not mask.any():
        return 0.0
    prod = w[mask] * values[mask]
    if np.isnan(prod).any():
        return float("nan")
    return float(prod.max())


def _av(values, w):
    mask = w > 0
    prod = w[mask] * values[mask]
    if np.isnan(prod).any():
        return float("nan")
    return float(prod.sum())


def weighted_norms(report: ProbReport, w) -> dict:
    """Average and worst-case weighted norms for each error family.

    Zero-weight entries never contribute, so an undefined e_post for an
    unweighted outcome does not poison the norm.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != report.e_joint.shape:
        raise ValueError(f"expected {report.e_joint.size} weights, got {w.size}")
    out = {}
    for name in ("joint", "cond", "post"):
        vec = getattr(report, f"e_{name}")
        out[name] = {"avg": _av(vec, w), "wc": _wc(vec, w)}
    return out
