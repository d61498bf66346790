"""Dense complex Hermitian kernel used by every other module."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-8


class NotHermitianError(ValueError):
    pass


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite square complex array."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def hermitian_part(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def hermitize(a, tol: float = HERMITIAN_TOL, name: str = "matrix") -> np.ndarray:
    """Return (A + A*)/2, rejecting inputs whose anti-Hermitian part exceeds ``tol``.

    The tolerance is relative to ``1 + ||A||_F``.
    """
    m = as_matrix(a, name)
    skew = np.linalg.norm(m - m.conj().T) / 2
    if skew > tol * (1.0 + np.linalg.norm(m)):
        raise NotHermitianError(f"{name} is not Hermitian (skew part {skew:.3e})")
    return hermitian_part(m)


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T

    def split(self, zero_tol: float = 0.0):
        """Partition eigenvector columns into (negative, zero, positive) blocks.

        Eigenvalues with magnitude at most ``zero_tol`` land in the zero block.
        """
        w, u = self.eigenvalues, self.eigenvectors
        neg = w < -zero_tol
        pos = w > zero_tol
        zero = ~(neg | pos)
        return u[:, neg], u[:, zero], u[:, pos]


def herm_eig(h) -> HermitianEig:
    """Ascending eigendecomposition of a Hermitian matrix.

    LAPACK's ``zheevd`` is deterministic for identical input bytes, so tied
    eigenvalues come back in a reproducible basis.
    """
    m = hermitize(h)
    w, u = np.linalg.eigh(m)
    return HermitianEig(w, u)


def eigvalsh(h) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(h))


def lambda_min(h) -> float:
    return float(eigvalsh(h)[0])


def lambda_max(h) -> float:
    return float(eigvalsh(h)[-1])


def psd_distance(h) -> float:
    """max(0, -lambda_min(H)); zero exactly when H is PSD."""
    m = hermitize(h)
    return max(0.0, -float(np.linalg.eigvalsh(m)[0]))


def inv_sqrt(h, tol: float = 1e-12) -> np.ndarray:
    """Inverse square root of a positive definite Hermitian matrix."""
    e = herm_eig(h)
    if e.eigenvalues[0] < tol:
        raise np.linalg.LinAlgError(
            f"matrix is singular or indefinite (lambda_min = {e.eigenvalues[0]:.3e})"
        )
    u = e.eigenvectors
    return hermitian_part((u / np.sqrt(e.eigenvalues)) @ u.conj().T)


def sqrtm_psd(h) -> np.ndarray:
    e = herm_eig(h)
    u = e.eigenvectors
    return hermitian_part((u * np.sqrt(np.clip(e.eigenvalues, 0.0, None))) @ u.conj().T)


def trace_inner(a, b) -> complex:
    """Tr(A B) without forming the product."""
    a = np.asarray(a)
    b = np.asarray(b)
    return complex(np.sum(a * b.T))


def rtrace(a, b) -> float:
    """Re Tr(A B); exact for Hermitian pairs up to rounding."""
    return trace_inner(a, b).real


def outer(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def projector(cols: np.ndarray) -> np.ndarray:
    """U U* for a matrix with orthonormal columns (empty -> zero matrix)."""
    return cols @ cols.conj().T


def unit_vector(v, tol: float = 1e-10, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    norm2 = float(np.vdot(v, v).real)
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"{name} must have unit norm (|v|^2 = {norm2:.12g})")
    return v


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of n x n Hermitian matrices under Re Tr(A B).

    Returned as an (n*n, n, n) array: diagonal units first, then the
    symmetric and antisymmetric off-diagonal pairs.
    """
    out = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for a in range(n):
        out[k, a, a] = 1.0
        k += 1
    r = 1.0 / np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            out[k, a, b] = out[k, b, a] = r
            k += 1
            out[k, a, b] = 1j * r
            out[k, b, a] = -1j * r
            k += 1
    return out


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix (Ginibre construction); full rank unless ``rank`` given."""
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    rho = g @ g.conj().T
    return hermitian_part(rho / np.trace(rho).real)


def random_unit(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
