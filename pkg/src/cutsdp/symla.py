"""Dense symmetric linear algebra.

Symmetric matrices are stored as the packed upper triangle so that symmetry
holds by representation rather than by convention. The module also provides
the closed-form eigenvalue bounds that certify how far points of a
trace-constrained linear or second-order cone region can sit from the
positive semidefinite cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "NumericalFailureError",
    "SymMat",
    "SpectralDecomp",
    "eigh",
    "nuclear_norm",
    "eigenvalue_trace_bound",
    "lambda_min_bound_lp",
    "lambda_min_bound_soc",
    "packed_size",
    "packed_index",
    "packed_weights",
    "diagonal_positions",
]


class NumericalFailureError(RuntimeError):
    """Eigensolver breakdown, annotated with the operand's order and norm."""

    def __init__(self, message: str, order: int | None = None, frob_norm: float | None = None):
        if order is not None:
            message = f"{message} (order={order}, frob_norm={frob_norm:.6g})"
        super().__init__(message)
        self.order = order
        self.frob_norm = frob_norm


def packed_size(n: int) -> int:
    """Number of entries in the packed upper triangle of an order-n matrix."""
    return n * (n + 1) // 2


def packed_index(n: int, i: int, j: int) -> int:
    """Position of entry (i, j) in row-major packed upper-triangle storage."""
    if i > j:
        i, j = j, i
    return i * n - (i * (i - 1)) // 2 + (j - i)


@lru_cache(maxsize=256)
def _triu_indices(n: int):
    return np.triu_indices(n)


@lru_cache(maxsize=256)
def packed_weights(n: int) -> np.ndarray:
    """Inner-product weights over packed storage: 1 on the diagonal, 2 off it.

    With these weights, ``sum(w * a * b)`` over packed vectors equals the
    Frobenius inner product of the corresponding full symmetric matrices.
    """
    rows, cols = _triu_indices(n)
    w = np.where(rows == cols, 1.0, 2.0)
    w.flags.writeable = False
    return w


@lru_cache(maxsize=256)
def diagonal_positions(n: int) -> np.ndarray:
    """Packed positions of the diagonal entries (i, i)."""
    pos = np.array([packed_index(n, i, i) for i in range(n)], dtype=np.int64)
    pos.flags.writeable = False
    return pos


class SymMat:
    """Immutable symmetric matrix of order n, packed upper triangle storage.

    Entries (i, j) and (j, i) read the same storage cell, so symmetry can
    never drift. All entries must be finite.
    """

    __slots__ = ("n", "packed")

    def __init__(self, n: int, packed: np.ndarray, validate: bool = True):
        packed = np.asarray(packed, dtype=np.float64)
        if packed.shape != (packed_size(n),):
            raise ValueError(
                f"packed storage for order {n} needs {packed_size(n)} entries, got {packed.shape}"
            )
        if validate and not np.all(np.isfinite(packed)):
            raise ValueError("symmetric matrix entries must be finite")
        packed = packed.copy()
        packed.flags.writeable = False
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "packed", packed)

    def __setattr__(self, name, value):  # pragma: no cover - defensive
        raise AttributeError("SymMat is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_dense(cls, mat: np.ndarray, sym_tol: float = 1e-8) -> "SymMat":
        """Build from a dense array, rejecting materially asymmetric input."""
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
        if np.max(np.abs(mat - mat.T)) > sym_tol * scale:
            raise ValueError("matrix is not symmetric within tolerance")
        n = mat.shape[0]
        sym = 0.5 * (mat + mat.T)
        return cls(n, sym[_triu_indices(n)], validate=True)

    @classmethod
    def zeros(cls, n: int) -> "SymMat":
        return cls(n, np.zeros(packed_size(n)), validate=False)

    @classmethod
    def identity(cls, n: int) -> "SymMat":
        packed = np.zeros(packed_size(n))
        packed[diagonal_positions(n)] = 1.0
        return cls(n, packed, validate=False)

    @classmethod
    def from_diag(cls, values) -> "SymMat":
        values = np.asarray(values, dtype=np.float64)
        n = values.shape[0]
        packed = np.zeros(packed_size(n))
        packed[diagonal_positions(n)] = values
        return cls(n, packed)

    @classmethod
    def from_spectral(cls, eigenvalues, eigenvectors) -> "SymMat":
        """Assemble Q diag(lam) Q^T."""
        lam = np.asarray(eigenvalues, dtype=np.float64)
        q = np.asarray(eigenvectors, dtype=np.float64)
        return cls.from_dense((q * lam) @ q.T, sym_tol=1e-6)

    # -- accessors ---------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n, n))
        rows, cols = _triu_indices(n)
        out[rows, cols] = self.packed
        out[cols, rows] = self.packed
        return out

    def __getitem__(self, key) -> float:
        i, j = key
        return float(self.packed[packed_index(self.n, i, j)])

    def trace(self) -> float:
        return float(self.packed[diagonal_positions(self.n)].sum())

    def frob_norm(self) -> float:
        return math.sqrt(float(np.dot(packed_weights(self.n), self.packed**2)))

    def abs_sum(self) -> float:
        """Entrywise 1-norm of the full matrix, sum_ij |X_ij|."""
        return float(np.dot(packed_weights(self.n), np.abs(self.packed)))

    def inner(self, other: "SymMat") -> float:
        """Frobenius inner product <X, Y>."""
        if other.n != self.n:
            raise ValueError(f"order mismatch: {self.n} vs {other.n}")
        return float(np.dot(packed_weights(self.n) * self.packed, other.packed))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"SymMat(n={self.n})"


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigendecomposition with eigenvalues ascending and orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def eigh(x: SymMat) -> SpectralDecomp:
    """Full dense eigendecomposition, eigenvalues in ascending order."""
    try:
        lam, q = np.linalg.eigh(x.to_dense())
    except np.linalg.LinAlgError as err:
        raise NumericalFailureError(
            f"eigendecomposition failed: {err}", order=x.n, frob_norm=x.frob_norm()
        ) from err
    return SpectralDecomp(eigenvalues=lam, eigenvectors=q)


def nuclear_norm(x: SymMat) -> float:
    """Sum of singular values; for symmetric input, sum of |eigenvalues|."""
    return float(np.abs(eigh(x).eigenvalues).sum())


def eigenvalue_trace_bound(trace: float, trace_sq: float, n: int) -> float:
    """Lower bound on the smallest eigenvalue from (tr X, tr X^2, n).

    Any symmetric order-n matrix with the given trace and squared-trace has
    lambda_min at least ``trace/n - sqrt((n-1) * (trace_sq/n - trace^2/n^2))``.
    The radical is defined as 0 for n = 1.
    """
    if n < 1:
        raise ValueError(f"order must be at least 1, got {n}")
    mean = trace / n
    scale = max(1.0, abs(trace_sq), trace * trace / n)
    variance = trace_sq / n - mean * mean
    if variance < -1e-12 * scale:
        raise ValueError(
            f"infeasible moment pair: trace_sq={trace_sq} < trace^2/n={trace * trace / n}"
        )
    return mean - math.sqrt((n - 1) * max(variance, 0.0))


def lambda_min_bound_lp(n: int, big_t: float) -> float:
    """Worst-case lambda_min over the linear minor region with trace big_t.

    Evaluates ``T/n - T*sqrt((n^3 - 1)(n - 1))/n``, which grows in magnitude
    roughly like ``-nT``. Degenerate n = 1 gives big_t back.
    """
    if n < 1:
        raise ValueError(f"order must be at least 1, got {n}")
    if big_t < 0:
        raise ValueError(f"trace bound must be nonnegative, got {big_t}")
    return big_t / n - big_t * math.sqrt((n**3 - 1) * (n - 1)) / n


def lambda_min_bound_soc(n: int, big_t: float) -> float:
    """Worst-case lambda_min over the 2x2-minor SOC region with trace big_t.

    Evaluates ``2T/n - T``; dimension-independent once the trace is fixed to 1,
    in contrast with the linear region's bound.
    """
    if n < 1:
        raise ValueError(f"order must be at least 1, got {n}")
    if big_t < 0:
        raise ValueError(f"trace bound must be nonnegative, got {big_t}")
    return 2.0 * big_t / n - big_t
