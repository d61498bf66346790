"""Input ensembles: states, priors, weights, and the transforms that build them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import hermitize, lambda_min, outer, unit_vector

STATE_TOL = 1e-9
MIXTURE_TOL = 1e-10


class EnsembleError(ValueError):
    """Invalid ensemble data. ``field`` names the offending input."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class SingularMixtureError(EnsembleError):
    pass


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    """States rho_i with priors p_i and weights w_i.

    Construction validates everything; set ``require_positive_mixture=False``
    only for analyses that deliberately work with a singular mixture.
    """

    states: tuple
    priors: np.ndarray
    weights: np.ndarray = None
    require_positive_mixture: bool = field(default=True, repr=False)

    def __post_init__(self):
        if len(self.states) == 0:
            raise EnsembleError("ensemble needs at least one state", "states")
        states = []
        for i, s in enumerate(self.states):
            try:
                rho = hermitize(s, name=f"states[{i}]")
            except ValueError as exc:
                raise EnsembleError(str(exc), f"states[{i}]") from exc
            states.append(rho)
        n = states[0].shape[0]
        for i, rho in enumerate(states):
            if rho.shape != (n, n):
                raise EnsembleError(f"states[{i}] has shape {rho.shape}, expected {(n, n)}", f"states[{i}]")
            if lambda_min(rho) < -STATE_TOL:
                raise EnsembleError(f"states[{i}] is not positive semidefinite", f"states[{i}]")
            tr = np.trace(rho).real
            if abs(tr - 1.0) > STATE_TOL:
                raise EnsembleError(f"states[{i}] has trace {tr:.12g}, expected 1", f"states[{i}]")
        m = len(states)

        p = np.asarray(self.priors, dtype=float).reshape(-1)
        if p.shape != (m,):
            raise EnsembleError(f"expected {m} priors, got {p.size}", "priors")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise EnsembleError("priors must be finite and non-negative", "priors")
        if abs(p.sum() - 1.0) > STATE_TOL:
            raise EnsembleError(f"priors sum to {p.sum():.12g}, expected 1", "priors")

        w = np.ones(m) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape != (m,):
            raise EnsembleError(f"expected {m} weights, got {w.size}", "weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.max() <= 0:
            raise EnsembleError("weights must be non-negative with at least one positive", "weights")

        for arr in states:
            arr.setflags(write=False)
        p.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "priors", p)
        object.__setattr__(self, "weights", w)

        if self.require_positive_mixture:
            lm = lambda_min(self.mixture())
            if lm <= MIXTURE_TOL:
                raise SingularMixtureError(
                    f"mixture rho is singular (lambda_min = {lm:.3e}); restrict attention to "
                    "the range space of rho (reduce_to_range) or pass require_positive_mixture=False",
                    "states",
                )

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @property
    def count(self) -> int:
        return len(self.states)

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.max()

    def mixture(self) -> np.ndarray:
        return mixture(self)

    def with_weights(self, weights) -> "StateEnsemble":
        return StateEnsemble(self.states, self.priors, weights, self.require_positive_mixture)

    def with_states(self, states) -> "StateEnsemble":
        return StateEnsemble(tuple(states), self.priors, self.weights, self.require_positive_mixture)


def mixture(e: StateEnsemble) -> np.ndarray:
    """rho = sum_j p_j rho_j."""
    return np.einsum("i,ijk->jk", e.priors, np.asarray(e.states))


def lump_partial(e: StateEnsemble, keep: Sequence[int]) -> StateEnsemble:
    """Keep the listed states and replace the rest by their normalized mixture.

    The residual state is appended last with the summed prior. Weights of kept
    states carry over; the residual gets weight 1.
    """
    keep = list(keep)
    if len(set(keep)) != len(keep) or any(not 0 <= k < e.count for k in keep):
        raise EnsembleError(f"keep must be distinct indices in [0, {e.count})", "keep")
    if len(keep) >= e.count:
        raise EnsembleError("keep must leave at least one state to lump (k < m)", "keep")
    rest = [i for i in range(e.count) if i not in keep]
    q = float(sum(e.priors[i] for i in rest))
    if q <= 0:
        raise EnsembleError("residual states have zero total prior", "keep")
    r = sum(e.priors[i] * e.states[i] for i in rest) / q
    states = [e.states[i] for i in keep] + [r]
    priors = [e.priors[i] for i in keep] + [q]
    weights = [e.weights[i] for i in keep] + [1.0]
    return StateEnsemble(tuple(states), np.array(priors), np.array(weights), e.require_positive_mixture)


def pure_state_scenario(psi, r, beta: float, weights=None, require_positive_mixture: bool = True) -> StateEnsemble:
    """Two-state ensemble {(psi psi*, 1 - beta), (r, beta)} for detecting one pure state."""
    if not 0.0 < beta < 1.0:
        raise EnsembleError(f"beta must lie in (0, 1), got {beta}", "beta")
    try:
        psi = unit_vector(psi, name="psi")
    except ValueError as exc:
        raise EnsembleError(str(exc), "psi") from exc
    return StateEnsemble(
        (outer(psi), np.asarray(r, dtype=complex)),
        np.array([1.0 - beta, beta]),
        weights,
        require_positive_mixture,
    )


def reduce_to_range(states, priors, weights=None, tol: float = MIXTURE_TOL):
    """Project a singular-mixture ensemble onto the range of its mixture.

    Returns ``(ensemble, V)`` where the columns of V span range(rho) and each
    new state is V* rho_i V. Every rho_i is supported on range(rho), so this
    loses nothing.
    """
    e = StateEnsemble(tuple(states), priors, weights, require_positive_mixture=False)
    w, u = np.linalg.eigh(e.mixture())
    v = u[:, w > tol]
    if v.shape[1] == 0:
        raise SingularMixtureError("mixture has empty range", "states")
    reduced = tuple(v.conj().T @ s @ v for s in e.states)
    reduced = tuple(s / np.trace(s).real for s in reduced)
    return StateEnsemble(reduced, e.priors, e.weights), v


def two_state_example() -> StateEnsemble:
    """psi_1 = (1, 1)/sqrt(2) with prior 2/3 and psi_2 = (1, 0) with prior 1/3, equal weights."""
    a = 1 / np.sqrt(2)
    return StateEnsemble((outer([a, a]), outer([1, 0])), np.array([2 / 3, 1 / 3]))
