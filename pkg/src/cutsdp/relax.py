"""Initial outer approximations of the positive semidefinite cone.

Three builders are provided. The linear region keeps all 2x2 minors
nonnegative through their diagonal dominance rows; with a trace bound T its
entrywise 1-norm stays below nT, giving a diameter of order nT. The
second-order cone region enforces X_ij^2 <= X_ii X_jj for every pair, is
bounded in Frobenius norm by T, and has diameter 2T, which is why it is the
default starting region for the cutting-plane engine. The aggregated region
collapses the pair constraints into one rotated cone per row for problems
too large for the full set.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .model import MAX, ConicProgram, SDPInstance
from .symla import SymMat, packed_index

__all__ = [
    "RelaxationKind",
    "build_lp_minor_relaxation",
    "build_soc_minor_relaxation",
    "build_aggregated_soc_relaxation",
    "diameter_bound",
]


class RelaxationKind(str, Enum):
    LP_MINOR = "lp_minor"
    SOC_MINOR = "soc_minor"
    SOC_AGGREGATED = "soc_aggregated"


def _base_program(instance: SDPInstance) -> ConicProgram:
    instance.validate()
    t = instance.require_trace_bound()
    prog = ConicProgram(instance.n, instance.sense)
    prog.trace_bound = t
    prog.trace_mode = instance.trace_mode
    prog.set_matrix_objective(instance.objective)
    trace_seen = False
    identity_packed = SymMat.identity(instance.n).packed
    for a_i, b_i in instance.constraints:
        prog.add_matrix_eq_row(a_i, b_i)
        if not trace_seen and np.array_equal(a_i.packed, identity_packed) and b_i == t:
            trace_seen = True
    if not trace_seen:
        n = instance.n
        diag_idx = [packed_index(n, i, i) for i in range(n)]
        ones = np.ones(n)
        if instance.trace_mode == "eq":
            prog.add_eq_row(diag_idx, ones, t)
        else:
            prog.add_ineq_row(diag_idx, ones, t)
    return prog


def _add_diagonal_nonnegativity(prog: ConicProgram) -> None:
    n = prog.n
    for i in range(n):
        prog.add_ineq_row([packed_index(n, i, i)], [-1.0], 0.0)


def build_lp_minor_relaxation(instance: SDPInstance) -> ConicProgram:
    """Linear region: X_ii >= 0 and X_ii + X_jj >= 2|X_ij| for every pair."""
    prog = _base_program(instance)
    n = instance.n
    _add_diagonal_nonnegativity(prog)
    for i in range(n):
        for j in range(i + 1, n):
            ii = packed_index(n, i, i)
            jj = packed_index(n, j, j)
            ij = packed_index(n, i, j)
            prog.add_ineq_row([ii, jj, ij], [-1.0, -1.0, -2.0], 0.0)
            prog.add_ineq_row([ii, jj, ij], [-1.0, -1.0, 2.0], 0.0)
    return prog


def build_soc_minor_relaxation(instance: SDPInstance) -> ConicProgram:
    """Cone region: ||(2X_ij, X_ii - X_jj)|| <= X_ii + X_jj for every pair.

    Each block is equivalent to X_ij^2 <= X_ii X_jj with nonnegative
    diagonal, so the region is bounded in Frobenius norm by the trace bound.
    """
    prog = _base_program(instance)
    n = instance.n
    _add_diagonal_nonnegativity(prog)
    for i in range(n):
        for j in range(i + 1, n):
            ii = packed_index(n, i, i)
            jj = packed_index(n, j, j)
            ij = packed_index(n, i, j)
            prog.add_soc_block(
                [
                    ([ii, jj], [1.0, 1.0], 0.0),
                    ([ij], [2.0], 0.0),
                    ([ii, jj], [1.0, -1.0], 0.0),
                ]
            )
    return prog


def build_aggregated_soc_relaxation(spca) -> ConicProgram:
    """Row-aggregated cone region for unit-trace spectral problems.

    Expects an object with a covariance ``sigma`` (SymMat) and a sparsity
    budget ``k``. Builds max <Sigma, X> subject to tr(X) = 1, one rotated
    cone sum_j X_ij^2 <= z_i X_ii per row, and the budget rows z <= e,
    e^T z <= k. The cone blocks force z >= 0 and a nonnegative diagonal on
    their own. Only valid under the unit-trace equality, whose value the
    row aggregation divides by.
    """
    sigma: SymMat = spca.sigma
    k = int(spca.k)
    n = sigma.n
    instance = SDPInstance(
        n=n,
        objective=sigma,
        constraints=[],
        trace_bound=1.0,
        trace_mode="eq",
        sense=MAX,
    )
    if getattr(spca, "trace_mode", "eq") != "eq":
        raise ValueError("the aggregated relaxation requires the unit-trace equality")
    prog = _base_program(instance)
    z_off = prog.add_aux_block("z", n)
    for i in range(n):
        prog.add_ineq_row([z_off + i], [1.0], 1.0)
    prog.add_ineq_row([z_off + i for i in range(n)], np.ones(n), float(k))
    for i in range(n):
        ii = packed_index(n, i, i)
        row_idx = [packed_index(n, i, j) for j in range(n)]
        block = [([z_off + i, ii], [1.0, 1.0], 0.0)]
        for idx in row_idx:
            block.append(([idx], [2.0], 0.0))
        block.append(([z_off + i, ii], [1.0, -1.0], 0.0))
        prog.add_soc_block(block)
    return prog


def diameter_bound(kind: RelaxationKind, n: int, big_t: float) -> float:
    """Worst-case diameter of the initial region under trace bound big_t."""
    if big_t < 0:
        raise ValueError("trace bound must be nonnegative")
    kind = RelaxationKind(kind)
    if kind == RelaxationKind.LP_MINOR:
        return 2.0 * n * big_t
    return 2.0 * big_t
