"""Separation oracles for the positive semidefinite cone.

Two cut families are provided. Trailing-eigenvalue cuts assert q^T X q >= 0
for eigenvectors q of negative eigenvalues and can emit several orthogonal
cuts per call. Nuclear-norm cuts build the spectral-norm-ball maximizer
Y* = sum_i sign(lam_i) q_i q_i^T, which attains <X, Y*> = ||X||_*, and emit
exactly one cut per call, either in membership form <X, Y* - I> <= 0 or in
epigraph form theta >= <X, Y*>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LinearCut
from .symla import SymMat, eigh

__all__ = [
    "OracleReport",
    "eig_cut_oracle",
    "nuclear_cut_oracle",
    "lipschitz_constant",
]


@dataclass
class OracleReport:
    """Separation outcome: worst violation, cuts, and the feasibility verdict."""

    violation: float
    cuts: list
    feasible: bool


def eig_cut_oracle(x_hat: SymMat, eps: float, max_cuts: int = 10) -> OracleReport:
    """Trailing-eigenvalue separation.

    Violation is max(0, -lambda_min). One rank-1 cut -<X, q q^T> <= 0 is
    emitted per eigenvalue below -eps, most negative first, capped at
    max_cuts. Eigenvalues in [-eps, 0) generate no cut; they cannot affect
    eps-feasible termination and only inflate the master.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if max_cuts < 1:
        raise ValueError("max_cuts must be at least 1")
    decomp = eigh(x_hat)
    lam = decomp.eigenvalues
    violation = max(0.0, -float(lam[0]))
    cuts = []
    for i in range(min(max_cuts, lam.shape[0])):
        if lam[i] >= -eps:
            break
        q = decomp.eigenvectors[:, i]
        q = q / np.linalg.norm(q)
        cuts.append(
            LinearCut("eig", theta_coeff=0.0, rhs=0.0, lr_signs=[-1.0], lr_vectors=q[:, None])
        )
    return OracleReport(violation=violation, cuts=cuts, feasible=violation <= eps)


def nuclear_cut_oracle(
    x_hat: SymMat,
    eps: float,
    mode: str = "membership",
    theta_hat: float | None = None,
) -> OracleReport:
    """Nuclear-norm separation via the signed spectral maximizer.

    Membership mode measures ||X||_* - tr(X) and cuts with <X, Y* - I> <= 0;
    Y* - I equals -2 times the projector onto the negative eigenspace, so it
    is stored low-rank (each trailing eigenvector listed twice with sign -1)
    when that projector is small, dense otherwise. Epigraph mode measures
    ||X||_* - theta and cuts with theta >= <X, Y*>. sign(0) is taken as +1 so
    Y* is deterministic under eigenvalue degeneracy.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if mode not in ("membership", "epigraph"):
        raise ValueError(f"unknown mode {mode!r}")
    decomp = eigh(x_hat)
    lam = decomp.eigenvalues
    q = decomp.eigenvectors
    n = x_hat.n
    nuc = float(np.abs(lam).sum())
    signs = np.where(lam < 0.0, -1.0, 1.0)

    if mode == "membership":
        violation = nuc - x_hat.trace()
        if violation <= eps:
            return OracleReport(violation=violation, cuts=[], feasible=True)
        neg = np.nonzero(lam < 0.0)[0]
        if neg.shape[0] <= max(1, n // 4):
            # Y* - I = -2 * sum_neg q q^T; list each vector twice to keep the
            # signed unit-vector representation exact.
            vecs = q[:, neg]
            vecs = vecs / np.linalg.norm(vecs, axis=0)
            doubled = np.repeat(vecs, 2, axis=1)
            cut = LinearCut(
                "nuclear",
                theta_coeff=0.0,
                rhs=0.0,
                lr_signs=-np.ones(doubled.shape[1]),
                lr_vectors=doubled,
            )
        else:
            g = (q * (signs - 1.0)) @ q.T
            cut = LinearCut("nuclear", theta_coeff=0.0, rhs=0.0, dense=SymMat.from_dense(g, sym_tol=1e-6))
        return OracleReport(violation=violation, cuts=[cut], feasible=False)

    if theta_hat is None:
        raise ValueError("epigraph mode requires the current theta value")
    violation = nuc - float(theta_hat)
    if violation <= eps:
        return OracleReport(violation=violation, cuts=[], feasible=True)
    y_star = SymMat.from_dense((q * signs) @ q.T, sym_tol=1e-6)
    cut = LinearCut("nuclear", theta_coeff=-1.0, rhs=0.0, dense=y_star)
    return OracleReport(violation=violation, cuts=[cut], feasible=False)


def lipschitz_constant(family: str, n: int) -> float:
    """Lipschitz constant of the cut family's violation function in X.

    Rank-1 trailing-eigenvalue cuts have unit Frobenius norm, giving 1. The
    nuclear family's coefficient Y - I has Frobenius norm at most 2 sqrt(n).
    """
    if n < 1:
        raise ValueError("order must be at least 1")
    if family == "eig":
        return 1.0
    if family == "nuclear":
        return 2.0 * math.sqrt(n)
    raise ValueError(f"unknown cut family {family!r}")
