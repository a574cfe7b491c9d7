"""Dense complex Hermitian algebra.

Eigendecomposition with a fixed phase convention, Hilbert-Schmidt inner
products, commutators and the unitary generated by a Hermitian matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import DEFAULT_TOLERANCES


class NumericalFailure(RuntimeError):
    """An eigensolver or other dense kernel did not converge."""


class DimensionMismatch(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


def _as_square(entries: ArrayLike) -> NDArray[np.complex128]:
    arr = np.array(entries, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionMismatch(f"expected a nonempty square matrix, got shape {arr.shape}")
    return arr


def frobenius(a: ArrayLike) -> float:
    return float(np.linalg.norm(np.asarray(a)))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Immutable dense Hermitian matrix.

    Hermiticity is checked at construction against
    ``tol_herm * max(1, ||entries||_F)`` and the stored matrix is then
    symmetrized exactly.
    """

    entries: NDArray[np.complex128]

    def __init__(self, entries: ArrayLike, tol: float = DEFAULT_TOLERANCES.herm):
        arr = _as_square(entries)
        defect = frobenius(arr - arr.conj().T)
        if defect > tol * max(1.0, frobenius(arr)):
            raise NotHermitianError(f"matrix is not Hermitian (defect {defect:.3e})")
        arr = 0.5 * (arr + arr.conj().T)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        return frobenius(self.entries)

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim)))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def _check(self, other: "HermitianOperator") -> None:
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions differ: {self.dim} vs {other.dim}")

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        self._check(other)
        return HermitianOperator(self.entries + other.entries)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        self._check(other)
        return HermitianOperator(self.entries - other.entries)

    def __mul__(self, scalar: float) -> "HermitianOperator":
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            raise TypeError("Hermitian operators only scale by real numbers")
        return HermitianOperator(float(np.real(scalar)) * self.entries)

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOperator":
        return HermitianOperator(-self.entries)

    def skew(self) -> NDArray[np.complex128]:
        """The skew-Hermitian generator ``i*H``."""
        return 1j * self.entries


@dataclass(frozen=True, eq=False)
class SpectrumPoint:
    """Ascending eigenvalues and orthonormal eigenvectors at one control value."""

    u: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]

    def __post_init__(self):
        for name in ("u", "eigenvalues", "eigenvectors"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def vector(self, j: int) -> NDArray[np.complex128]:
        """Eigenvector of the ``j``-th eigenvalue (1-based, ascending)."""
        return self.eigenvectors[:, j - 1]

    def gaps(self) -> NDArray[np.float64]:
        return np.diff(self.eigenvalues)

    def reconstruct(self) -> NDArray[np.complex128]:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    entries: NDArray[np.complex128]

    def __init__(self, entries: ArrayLike, tol: float = DEFAULT_TOLERANCES.unitary):
        arr = _as_square(entries)
        defect = unitarity_defect(arr)
        if defect > tol:
            raise NumericalFailure(f"matrix is not unitary (defect {defect:.3e})")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "UnitaryOperator") -> NDArray[np.complex128]:
        return self.entries @ np.asarray(getattr(other, "entries", other))

    def dagger(self) -> NDArray[np.complex128]:
        return self.entries.conj().T


def unitarity_defect(u: ArrayLike) -> float:
    u = np.asarray(u)
    return frobenius(u.conj().T @ u - np.eye(u.shape[0]))


def fix_phases(vectors: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Rotate each column so that its largest-modulus entry is real positive.

    Ties between entries of equal modulus (to 12 decimals) go to the lowest
    index.
    """
    mags = np.round(np.abs(vectors), 12)
    idx = np.argmax(mags, axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    phases = np.conj(pivots) / np.abs(pivots)
    return vectors * phases


def eig_hermitian(h: HermitianOperator | ArrayLike, u: ArrayLike = ()) -> SpectrumPoint:
    """Ascending eigendecomposition with deterministic eigenvector phases.

    Within a numerically degenerate cluster the returned vectors are an
    arbitrary orthonormal basis of the cluster; use projectors there.
    """
    mat = h.entries if isinstance(h, HermitianOperator) else HermitianOperator(h).entries
    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Hermitian eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalFailure("eigensolver returned non-finite eigenvalues")
    return SpectrumPoint(np.asarray(u, dtype=float), w, fix_phases(v))


def eigvalsh_batch(stack: NDArray[np.complex128]) -> NDArray[np.float64]:
    """Eigenvalues of a stack of Hermitian matrices, shape ``(..., n)``."""
    try:
        return np.linalg.eigvalsh(stack)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"batched eigensolver failed: {exc}") from exc


def _pair(a: ArrayLike, b: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(getattr(a, "entries", a))
    b = np.asarray(getattr(b, "entries", b))
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def commutator(a: ArrayLike, b: ArrayLike) -> NDArray[np.complex128]:
    """``AB - BA``. Skew-Hermitian inputs give a skew-Hermitian result."""
    a, b = _pair(a, b)
    return a @ b - b @ a


def hs_inner(a: ArrayLike, b: ArrayLike) -> float:
    """Real Hilbert-Schmidt inner product ``Re tr(A^dagger B)``."""
    a, b = _pair(a, b)
    return float(np.vdot(a, b).real)


def evolve(h: HermitianOperator | SpectrumPoint, t: float) -> UnitaryOperator:
    """``exp(-i t H)`` through the eigendecomposition of ``H``."""
    sp = h if isinstance(h, SpectrumPoint) else eig_hermitian(h)
    v = sp.eigenvectors
    phases = np.exp(-1j * t * sp.eigenvalues)
    return UnitaryOperator((v * phases) @ v.conj().T)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> NDArray[np.complex128]:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(n: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def is_skew_hermitian(a: ArrayLike, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    return frobenius(a + a.conj().T) <= tol * max(1.0, frobenius(a))


def stack_sum(base: ArrayLike, terms: Sequence[ArrayLike], coeffs: ArrayLike) -> NDArray[np.complex128]:
    """``base + sum_k coeffs[k] * terms[k]``."""
    out = np.array(base, dtype=np.complex128)
    for c, t in zip(np.asarray(coeffs, dtype=float), terms):
        if c:
            out = out + c * np.asarray(getattr(t, "entries", t))
    return out
