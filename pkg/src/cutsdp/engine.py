"""Outer-approximation engine.

Repeatedly solves the conic master problem, separates the returned iterate
against the configured cut family, imposes the violated cuts, and stops once
the iterate is eps-feasible (or, when an application supplies incumbents, once
the relative gap between incumbent and bound closes). Also provides the
worst-case iteration-count diagnostic and the ball-separation check that the
convergence argument guarantees on recorded iterates.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    STATUS_OPTIMAL,
    ConicProgram,
    SolverBackend,
    evaluate_cut,
    solve_master,
)
from .oracle import eig_cut_oracle, lipschitz_constant, nuclear_cut_oracle
from .symla import SymMat

__all__ = [
    "EngineConfig",
    "IterationRecord",
    "SolveResult",
    "solve",
    "oracle_for_config",
    "theoretical_iteration_bound",
    "ball_separation_check",
    "write_trace_csv",
    "TRACE_COLUMNS",
]

CONVERGED = "converged"
ITERATION_LIMIT = "iteration_limit"
BACKEND_FAILURE = "backend_failure"

FAMILY_EIG = "eig"
FAMILY_NUCLEAR_MEMBERSHIP = "nuclear_membership"
FAMILY_NUCLEAR_EPIGRAPH = "nuclear_epigraph"

TRACE_COLUMNS = ["iteration", "bound", "violation", "cuts_total", "upper_bound", "seconds"]


@dataclass
class EngineConfig:
    """Loop parameters.

    Violation scaling defaults to trace-relative because the two cut
    families' violations scale differently with the trace bound; termination
    then tests f <= eps * max(1, tr X). Cut retention defaults to keep-all,
    which the ball-separation diagnostic relies on; drop-inactive voids it.
    """

    eps: float = 1e-6
    max_iterations: int = 2000
    cut_family: str = FAMILY_EIG
    max_cuts_per_iter: int = 10
    ridge_gamma: float | None = None
    violation_scaling: str = "trace_relative"  # or "absolute"
    cut_retention: str = "keep_all"  # or "drop_inactive"
    drop_inactive_age: int = 50
    retain_iterates: bool = False
    max_total_cuts: int | None = None
    gap_tol: float | None = None
    stall_window: int = 50
    stall_tol: float = 1e-12

    def validate(self, backend: SolverBackend) -> None:
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        # Termination must be decidable above solver noise.
        if not self.eps > 10.0 * backend.feasibility_tol:
            raise ValueError(
                f"eps={self.eps} must exceed 10x the backend tolerance {backend.feasibility_tol}"
            )
        if self.cut_family not in (FAMILY_EIG, FAMILY_NUCLEAR_MEMBERSHIP, FAMILY_NUCLEAR_EPIGRAPH):
            raise ValueError(f"unknown cut family {self.cut_family!r}")
        if self.violation_scaling not in ("trace_relative", "absolute"):
            raise ValueError(f"unknown violation scaling {self.violation_scaling!r}")
        if self.cut_retention not in ("keep_all", "drop_inactive"):
            raise ValueError(f"unknown cut retention {self.cut_retention!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class IterationRecord:
    iteration: int
    bound: float
    violation: float
    cuts_total: int
    upper_bound: float | None
    seconds: float
    iterate: SymMat | None = None


@dataclass
class SolveResult:
    status: str
    x_mat: SymMat | None
    bound: float
    trace: list = field(default_factory=list)
    theoretical_log_bound: float = float("nan")
    annotation: str = ""
    solution: object = None  # final BackendSolution

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def cuts_total(self) -> int:
        return self.trace[-1].cuts_total if self.trace else 0


def oracle_for_config(config: EngineConfig):
    """Separation closure (x_hat, theta_hat, eps) -> OracleReport."""
    family = config.cut_family
    if family == FAMILY_EIG:
        return lambda x_hat, theta_hat, eps: eig_cut_oracle(
            x_hat, eps, max_cuts=config.max_cuts_per_iter
        )
    if family == FAMILY_NUCLEAR_MEMBERSHIP:
        return lambda x_hat, theta_hat, eps: nuclear_cut_oracle(x_hat, eps, mode="membership")
    if family == FAMILY_NUCLEAR_EPIGRAPH:
        return lambda x_hat, theta_hat, eps: nuclear_cut_oracle(
            x_hat, eps, mode="epigraph", theta_hat=theta_hat
        )
    raise ValueError(f"unknown cut family {family!r}")


def _lipschitz_family(cut_family: str) -> str:
    return "eig" if cut_family == FAMILY_EIG else "nuclear"


def _relative_gap(bound: float, incumbent: float, sense: str) -> float:
    if sense == "min":
        return (incumbent - bound) / max(abs(incumbent), 1e-12)
    return (bound - incumbent) / max(abs(incumbent), 1e-12)


def solve(
    program: ConicProgram,
    oracle,
    backend: SolverBackend,
    config: EngineConfig,
    incumbent_fn=None,
) -> SolveResult:
    """Run the cutting-plane loop on a bounded master program.

    ``oracle`` maps (x_hat, theta_hat, eps_effective) to an OracleReport.
    ``incumbent_fn``, when given, maps (x_hat, solution) to a feasible
    objective value of the original problem; the best value seen so far is
    recorded each iteration and drives the optional relative-gap stop.
    """
    config.validate(backend)
    if program.trace_bound is None and program.ridge_gamma is None:
        raise ValueError(
            "unbounded master: add a trace constraint or a ridge term before solving"
        )

    big_t = program.trace_bound
    lips = lipschitz_constant(_lipschitz_family(config.cut_family), program.n)
    log_bound = (
        theoretical_iteration_bound(lips, big_t, config.eps, program.n)
        if big_t is not None
        else float("nan")
    )

    records: list[IterationRecord] = []
    inactive_age: list[int] = [0] * len(program.cuts)
    best_incumbent: float | None = None
    prev_bound: float | None = None
    prev_violation: float | None = None
    stall_count = 0
    start = time.perf_counter()

    def finish(status, x_mat, bound, annotation, solution=None):
        return SolveResult(
            status=status,
            x_mat=x_mat,
            bound=bound,
            trace=records,
            theoretical_log_bound=log_bound,
            annotation=annotation,
            solution=solution,
        )

    x_mat = None
    bound = float("nan")
    for t in range(1, config.max_iterations + 1):
        sol = solve_master(backend, program)
        if sol.status != STATUS_OPTIMAL:
            note = f"master status {sol.status} ({sol.raw_status})"
            if program.cuts:
                note += " after cut addition; valid cuts cannot cut off the PSD-feasible set"
            return finish(BACKEND_FAILURE, x_mat, bound, note, sol)
        x_mat = sol.x_mat
        bound = sol.objective
        scale = max(1.0, x_mat.trace()) if config.violation_scaling == "trace_relative" else 1.0
        eps_eff = config.eps * scale
        report = oracle(x_mat, sol.theta(), eps_eff)

        if incumbent_fn is not None:
            value = incumbent_fn(x_mat, sol)
            if value is not None:
                if best_incumbent is None:
                    best_incumbent = value
                elif program.sense == "min":
                    best_incumbent = min(best_incumbent, value)
                else:
                    best_incumbent = max(best_incumbent, value)

        records.append(
            IterationRecord(
                iteration=t,
                bound=bound,
                violation=report.violation,
                cuts_total=len(program.cuts),
                upper_bound=best_incumbent,
                seconds=time.perf_counter() - start,
                iterate=x_mat if config.retain_iterates else None,
            )
        )

        if report.violation <= eps_eff:
            return finish(CONVERGED, x_mat, bound, "eps_feasible", sol)
        if (
            config.gap_tol is not None
            and best_incumbent is not None
            and _relative_gap(bound, best_incumbent, program.sense) <= config.gap_tol
        ):
            return finish(CONVERGED, x_mat, bound, "gap_target", sol)
        if config.max_total_cuts is not None and len(program.cuts) >= config.max_total_cuts:
            return finish(ITERATION_LIMIT, x_mat, bound, "cut_budget", sol)

        if prev_bound is not None:
            if (
                abs(bound - prev_bound) < config.stall_tol
                and abs(report.violation - prev_violation) < config.stall_tol
            ):
                stall_count += 1
            else:
                stall_count = 0
            if stall_count >= config.stall_window:
                return finish(ITERATION_LIMIT, x_mat, bound, "stall", sol)
        prev_bound = bound
        prev_violation = report.violation

        if config.cut_retention == "drop_inactive" and program.cuts:
            keep = []
            for k, cut in enumerate(program.cuts):
                slack = evaluate_cut(cut, sol.theta(), x_mat)
                if slack < -1e-7:
                    inactive_age[k] += 1
                else:
                    inactive_age[k] = 0
                keep.append(inactive_age[k] < config.drop_inactive_age)
            if not all(keep):
                program.remove_cuts(keep)
                inactive_age = [a for a, k in zip(inactive_age, keep) if k]

        if not report.cuts:
            return finish(ITERATION_LIMIT, x_mat, bound, "oracle_empty", sol)
        for cut in report.cuts:
            cut.birth_iteration = t
            program.append_cut(cut)
            inactive_age.append(0)

    return finish(ITERATION_LIMIT, x_mat, bound, "", None)


def theoretical_iteration_bound(lipschitz: float, big_t: float, eps: float, n: int) -> float:
    """Log of the worst-case iteration count, n^2 * log(L T / eps + 1).

    Returned in log form to avoid overflow; diagnostic only.
    """
    if lipschitz <= 0 or big_t <= 0 or eps <= 0 or n < 1:
        raise ValueError("all inputs must be positive")
    return n * n * math.log(lipschitz * big_t / eps + 1.0)


def ball_separation_check(trace: list, eps: float, lipschitz: float, slack: float = 1e-9) -> bool:
    """Verify that non-terminal iterates never revisit a ball of radius eps/L.

    ``trace`` must carry retained iterates. Records whose violation is at
    most eps are terminal and excluded. Returns True iff every pairwise
    Frobenius distance among the rest exceeds eps/L - slack.
    """
    iterates = []
    for record in trace:
        if record.violation <= eps:
            continue
        if record.iterate is None:
            raise ValueError("ball separation needs retained iterates; enable retain_iterates")
        iterates.append(record.iterate)
    radius = eps / lipschitz - slack
    for a in range(len(iterates)):
        da = iterates[a].packed
        for b in range(a + 1, len(iterates)):
            diff = SymMat(iterates[a].n, da - iterates[b].packed, validate=False)
            if diff.frob_norm() <= radius:
                return False
    return True


def write_trace_csv(records: list, path) -> None:
    """Convergence trace with fixed column order, one row per iteration."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.iteration,
                    repr(r.bound),
                    repr(r.violation),
                    r.cuts_total,
                    "" if r.upper_bound is None else repr(r.upper_bound),
                    f"{r.seconds:.6f}",
                ]
            )
