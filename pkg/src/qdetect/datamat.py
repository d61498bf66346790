"""Data matrices that linearize the detector-design objectives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import StateEnsemble
from .linalg import hermitian_part


def normalize_weights(e: StateEnsemble, w=None) -> np.ndarray:
    """Weights scaled so the largest is 1 (the ensemble's own weights by default)."""
    w = e.weights if w is None else np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (e.count,):
        raise ValueError(f"expected {e.count} weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.max() <= 0:
        raise ValueError("weights must be non-negative with at least one positive")
    return w / w.max()


def avg_joint_matrices(e: StateEnsemble, w) -> list:
    """A_i = w_i (rho - p_i rho_i); the average joint error is sum_i Tr O_i A_i."""
    rho = e.mixture()
    return [w[i] * (rho - e.priors[i] * e.states[i]) for i in range(e.count)]


@dataclass(frozen=True, eq=False)
class DataMatrices:
    """A_i(delta) = (w_i - delta) rho - w_i p_i rho_i for every state."""

    delta: float
    matrices: tuple
    weights: np.ndarray

    def __getitem__(self, i):
        return self.matrices[i]

    def __len__(self):
        return len(self.matrices)

    def constrained(self) -> list:
        """Indices of states whose posterior error is constrained (w_i > 0)."""
        return [i for i in range(len(self.matrices)) if self.weights[i] > 0]


def data_matrices(e: StateEnsemble, w, delta: float) -> DataMatrices:
    rho = e.mixture()
    w = np.asarray(w, dtype=float)
    mats = tuple(hermitian_part((w[i] - delta) * rho - w[i] * e.priors[i] * e.states[i]) for i in range(e.count))
    return DataMatrices(float(delta), mats, w)


def outcome_index(i: int, inconclusive: bool) -> int:
    """Observed outcome that declares state i."""
    return i + 1 if inconclusive else i


def noise_matrix(nu, n_elements: int, m: int, inconclusive: bool) -> np.ndarray:
    """Validated m_hat x K noise matrix; the identity when ``nu`` is None."""
    if nu is None:
        return np.eye(n_elements)
    mat = nu.matrix if hasattr(nu, "matrix") else np.asarray(nu, dtype=float)
    if mat.shape[1] != n_elements:
        raise ValueError(f"noise matrix has {mat.shape[1]} columns, design has {n_elements} elements")
    need = m + 1 if inconclusive else m
    if mat.shape[0] < need:
        raise ValueError(f"noise matrix needs at least {need} rows, got {mat.shape[0]}")
    return mat


def generalized_matrices(dm: DataMatrices, lam, nu_mat: np.ndarray, inconclusive: bool) -> list:
    """G_j = sum_i lam_i nu[out(i), j] A_i(delta), one per noise-free element j.

    With noise-free measurements this is lam_j A_j, and G_0 = 0 for an
    inconclusive element.
    """
    k = nu_mat.shape[1]
    n = dm.matrices[0].shape[0]
    out = [np.zeros((n, n), dtype=complex) for _ in range(k)]
    for i in dm.constrained():
        if lam[i] == 0:
            continue
        row = nu_mat[outcome_index(i, inconclusive)]
        for j in range(k):
            if row[j] != 0:
                out[j] = out[j] + lam[i] * row[j] * dm.matrices[i]
    return out
