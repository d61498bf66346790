"""POVMs and classical measurement-noise models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import herm_eig, hermitize, inv_sqrt, lambda_min, outer

POVM_TOL = 1e-8


class PovmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered POVM elements. With ``has_inconclusive`` element 0 is O_0.

    ``check=False`` skips the resolution-of-identity test, which lets
    certificates report an infeasible candidate instead of refusing it.
    """

    elements: tuple
    has_inconclusive: bool = False
    check: bool = True

    def __post_init__(self):
        els = tuple(hermitize(o, name=f"elements[{i}]") for i, o in enumerate(self.elements))
        if not els:
            raise PovmError("POVM needs at least one element")
        n = els[0].shape[0]
        if any(o.shape != (n, n) for o in els):
            raise PovmError("POVM elements must share one dimension")
        for o in els:
            o.setflags(write=False)
        object.__setattr__(self, "elements", els)
        if self.check:
            v = self.feasibility_violation()
            if v > POVM_TOL:
                raise PovmError(f"not a POVM (violation {v:.3e})")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    @property
    def conclusive(self) -> tuple:
        return self.elements[1:] if self.has_inconclusive else self.elements

    @property
    def inconclusive(self):
        return self.elements[0] if self.has_inconclusive else None

    def outcome_of_state(self, i: int) -> int:
        """Element index that declares state ``i``."""
        return i + 1 if self.has_inconclusive else i

    def feasibility_violation(self) -> float:
        """max(||sum O_i - I||_F, worst negative eigenvalue)."""
        n = self.dim
        res = np.linalg.norm(sum(self.elements) - np.eye(n))
        neg = max(0.0, -min(lambda_min(o) for o in self.elements))
        return float(max(res, neg))


def projective_povm(basis) -> Povm:
    """Rank-one projectors onto the columns of a unitary."""
    u = np.asarray(basis, dtype=complex)
    return Povm(tuple(outer(u[:, k]) for k in range(u.shape[1])))


def renormalize(elements, has_inconclusive: bool = False) -> Povm:
    """Map PSD matrices with positive definite sum S onto S^-1/2 O_i S^-1/2."""
    els = [0.5 * (o + o.conj().T) for o in elements]
    r = inv_sqrt(sum(els))
    return Povm(tuple(r @ o @ r for o in els), has_inconclusive)


def rank_one_approximation(povm: Povm, ratio: float = 100.0):
    """Replace O_i by sigma_1 u_1 u_1* where sigma_1/sigma_2 >= ratio, then renormalize.

    Returns ``(approx_povm, replaced)`` with ``replaced`` the element indices
    that were approximated. The exact POVM is left untouched.
    """
    out, replaced = [], []
    for i, o in enumerate(povm.elements):
        e = herm_eig(o)
        s = e.eigenvalues[::-1]
        if s[0] > 0 and (len(s) == 1 or s[1] <= 0 or s[0] / s[1] >= ratio):
            out.append(s[0] * outer(e.eigenvectors[:, -1]))
            replaced.append(i)
        else:
            out.append(o)
    return renormalize(out, povm.has_inconclusive), replaced


def dominant_direction(o) -> np.ndarray:
    """Top eigenvector scaled by sqrt of its eigenvalue, phase-fixed so the
    largest-magnitude entry is real and positive."""
    e = herm_eig(o)
    v = e.eigenvectors[:, -1] * np.sqrt(max(e.eigenvalues[-1], 0.0))
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) > 0:
        v = v * (abs(v[k]) / v[k])
    return v


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Column-stochastic matrix: nu[i, j] = P(observe i | noise-free outcome j)."""

    matrix: np.ndarray

    def __post_init__(self):
        nu = np.array(self.matrix, dtype=float)
        if nu.ndim != 2 or nu.shape[0] < nu.shape[1]:
            raise PovmError(f"noise matrix must be m_hat x m with m_hat >= m, got shape {nu.shape}")
        if np.any(nu < 0) or not np.all(np.isfinite(nu)):
            raise PovmError("noise matrix entries must be finite and non-negative")
        cols = nu.sum(axis=0)
        if np.max(np.abs(cols - 1.0)) > 1e-10:
            raise PovmError(f"noise matrix columns must sum to 1, got {cols}")
        nu.setflags(write=False)
        object.__setattr__(self, "matrix", nu)

    @property
    def shape(self):
        return self.matrix.shape

    @classmethod
    def identity(cls, m: int) -> "NoiseModel":
        return cls(np.eye(m))

    @classmethod
    def binary(cls, nu0: float) -> "NoiseModel":
        """[[1 - nu0, nu0], [nu0, 1 - nu0]]."""
        return cls(np.array([[1 - nu0, nu0], [nu0, 1 - nu0]]))

    @classmethod
    def symmetric(cls, m: int, nu0: float) -> "NoiseModel":
        """1 - nu0 on the diagonal, nu0/(m - 1) elsewhere."""
        if m == 1:
            return cls(np.eye(1))
        nu = np.full((m, m), nu0 / (m - 1))
        np.fill_diagonal(nu, 1 - nu0)
        return cls(nu)

    @classmethod
    def inconclusive(cls, nu0: float) -> "NoiseModel":
        """Three-outcome family with 1 - nu0 on the diagonal and nu0/2 elsewhere."""
        return cls.symmetric(3, nu0)


def noisy_povm(nu: NoiseModel, povm: Povm) -> Povm:
    """O_i^noisy = sum_j nu_ij O_j."""
    mat = nu.matrix
    if mat.shape[1] != len(povm):
        raise PovmError(f"noise matrix has {mat.shape[1]} columns but POVM has {len(povm)} elements")
    stack = np.asarray(povm.elements)
    noisy = np.einsum("ij,jab->iab", mat, stack)
    return Povm(tuple(noisy), povm.has_inconclusive, check=povm.check)

