"""Solver backends.

The default backend wraps Clarabel, a sparse interior-point solver for
linear and second-order cone programs. Anything implementing SolverBackend
can be dropped in instead.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import (
    STATUS_INFEASIBLE,
    STATUS_NUMERICAL,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    ConeData,
    RawBackendResult,
    SolverBackend,
)

__all__ = ["ClarabelBackend", "default_backend"]

_STATUS_MAP = {
    "Solved": STATUS_OPTIMAL,
    "AlmostSolved": STATUS_OPTIMAL,
    "PrimalInfeasible": STATUS_INFEASIBLE,
    "AlmostPrimalInfeasible": STATUS_INFEASIBLE,
    "DualInfeasible": STATUS_UNBOUNDED,
    "AlmostDualInfeasible": STATUS_UNBOUNDED,
}


class ClarabelBackend(SolverBackend):
    """Clarabel-backed cone solver: linear rows plus second-order cones only."""

    name = "clarabel"

    def __init__(self, feasibility_tol: float = 1e-8, max_iter: int = 200, verbose: bool = False):
        self.feasibility_tol = float(feasibility_tol)
        self.max_iter = int(max_iter)
        self.verbose = bool(verbose)

    def solve_cone(self, cone: ConeData) -> RawBackendResult:
        import clarabel

        nvar = cone.nvar
        blocks = []
        bs = []
        cones = []
        if cone.a_eq.shape[0]:
            blocks.append(cone.a_eq)
            bs.append(cone.b_eq)
            cones.append(clarabel.ZeroConeT(cone.a_eq.shape[0]))
        if cone.a_ub.shape[0]:
            blocks.append(cone.a_ub)
            bs.append(cone.b_ub)
            cones.append(clarabel.NonnegativeConeT(cone.a_ub.shape[0]))
        for a_blk, b_blk in cone.socs:
            blocks.append(a_blk)
            bs.append(b_blk)
            cones.append(clarabel.SecondOrderConeT(b_blk.shape[0]))
        if blocks:
            a_all = sp.vstack(blocks, format="csc")
            b_all = np.concatenate(bs)
        else:
            a_all = sp.csc_matrix((0, nvar))
            b_all = np.zeros(0)

        settings = clarabel.DefaultSettings()
        settings.verbose = self.verbose
        settings.max_iter = self.max_iter
        settings.tol_feas = self.feasibility_tol

        solver = clarabel.DefaultSolver(
            sp.csc_matrix((nvar, nvar)), cone.c, a_all, b_all, cones, settings
        )
        sol = solver.solve()
        raw = str(sol.status)
        status = _STATUS_MAP.get(raw, STATUS_NUMERICAL)
        x = np.asarray(sol.x) if status == STATUS_OPTIMAL else None
        return RawBackendResult(status=status, x=x, objective=float(sol.obj_val), solver_status=raw)


def default_backend(**kwargs) -> SolverBackend:
    return ClarabelBackend(**kwargs)
