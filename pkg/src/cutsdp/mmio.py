"""Matrix Market I/O for symmetric matrices.

Reads both coordinate and array format files; writes array format with
symmetric storage. Used by the command-line tools to ingest covariance and
correlation matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse

from .symla import SymMat

__all__ = ["read_symmetric", "write_symmetric"]


def read_symmetric(path, sym_tol: float = 1e-8) -> SymMat:
    """Read a Matrix Market file into a SymMat.

    Files declared ``general`` are accepted when their content is numerically
    symmetric; genuinely asymmetric input is rejected.
    """
    mat = scipy.io.mmread(path)
    if scipy.sparse.issparse(mat):
        mat = mat.toarray()
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got shape {mat.shape}")
    return SymMat.from_dense(mat, sym_tol=sym_tol)


def write_symmetric(path, x: SymMat, comment: str = "") -> None:
    """Write a SymMat in Matrix Market array format with symmetric storage."""
    scipy.io.mmwrite(path, x.to_dense(), comment=comment, symmetry="symmetric")
