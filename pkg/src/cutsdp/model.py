"""Conic master-problem representation and the solver-backend seam.

A ConicProgram couples one symmetric matrix variable (packed upper triangle)
with optional scalar auxiliary blocks under a linear objective, linear
equality and inequality rows, second-order cone blocks, and an accumulating
list of linear cuts. Backends only ever see linear rows plus second-order
cones; no positive semidefinite cone support is required of them.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .symla import SymMat, packed_size, packed_weights

__all__ = [
    "FORMAT_VERSION",
    "SDPInstance",
    "LinearCut",
    "ConicProgram",
    "ConeData",
    "RawBackendResult",
    "BackendSolution",
    "SolverBackend",
    "add_cut",
    "evaluate_cut",
    "solve_master",
    "program_to_json",
    "program_from_json",
    "solution_to_json",
    "solution_from_json",
]

FORMAT_VERSION = 1

MIN = "min"
MAX = "max"

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical_trouble"


@dataclass
class SDPInstance:
    """A linear objective over a PSD matrix with equality constraints.

    ``trace_bound`` is the constant bounding tr(X) over all feasible
    solutions; relaxation builders refuse to run without a positive value.
    ``trace_mode`` selects between tr(X) = T and tr(X) <= T.
    """

    n: int
    objective: SymMat
    constraints: list  # list of (SymMat, float)
    trace_bound: float | None = None
    trace_mode: str = "eq"  # "eq" | "le"
    sense: str = MIN

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("order must be at least 1")
        if self.objective.n != self.n:
            raise ValueError("objective order mismatch")
        for a_i, _ in self.constraints:
            if a_i.n != self.n:
                raise ValueError("constraint matrix order mismatch")
        if self.trace_mode not in ("eq", "le"):
            raise ValueError(f"unknown trace mode {self.trace_mode!r}")
        if self.sense not in (MIN, MAX):
            raise ValueError(f"unknown sense {self.sense!r}")

    def require_trace_bound(self) -> float:
        if self.trace_bound is None or not self.trace_bound > 0:
            raise ValueError(
                "a positive trace bound is required before building a relaxation"
            )
        return float(self.trace_bound)


class LinearCut:
    """One separating hyperplane a*theta + <G, X> <= rhs.

    The matrix coefficient is stored either dense or as a signed list of unit
    vectors meaning G = sum_i s_i q_i q_i^T with s_i in {-1, +1}. Entries of
    the signed list may repeat, which is how integer multiples of a projector
    are expressed without scaling the vectors.
    """

    __slots__ = ("family", "theta_coeff", "rhs", "birth_iteration", "dense", "lr_signs", "lr_vectors")

    def __init__(
        self,
        family: str,
        theta_coeff: float = 0.0,
        rhs: float = 0.0,
        birth_iteration: int = 0,
        dense: SymMat | None = None,
        lr_signs=None,
        lr_vectors=None,
    ):
        if family not in ("eig", "nuclear"):
            raise ValueError(f"unknown cut family {family!r}")
        if (dense is None) == (lr_signs is None):
            raise ValueError("exactly one of dense or low-rank storage must be given")
        if lr_signs is not None:
            lr_signs = np.asarray(lr_signs, dtype=np.float64)
            lr_vectors = np.asarray(lr_vectors, dtype=np.float64)
            if lr_vectors.ndim != 2 or lr_vectors.shape[1] != lr_signs.shape[0]:
                raise ValueError("low-rank vectors must be columns, one per sign")
            if not np.all(np.isin(lr_signs, (-1.0, 1.0))):
                raise ValueError("low-rank signs must be -1 or +1")
            norms = np.linalg.norm(lr_vectors, axis=0)
            if np.any(np.abs(norms - 1.0) > 1e-10):
                raise ValueError("low-rank vectors must be unit norm within 1e-10")
        self.family = family
        self.theta_coeff = float(theta_coeff)
        self.rhs = float(rhs)
        self.birth_iteration = int(birth_iteration)
        self.dense = dense
        self.lr_signs = lr_signs
        self.lr_vectors = lr_vectors

    @property
    def order(self) -> int:
        if self.dense is not None:
            return self.dense.n
        return self.lr_vectors.shape[0]

    def matrix(self) -> SymMat:
        """The matrix coefficient G as a SymMat."""
        if self.dense is not None:
            return self.dense
        g = (self.lr_vectors * self.lr_signs) @ self.lr_vectors.T
        return SymMat.from_dense(g, sym_tol=1e-6)

    def packed_coefficients(self) -> np.ndarray:
        """Row coefficients over packed X such that coeffs . x = <G, X>."""
        g = self.matrix()
        return packed_weights(g.n) * g.packed

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "theta_coeff": self.theta_coeff,
            "rhs": self.rhs,
            "birth_iteration": self.birth_iteration,
        }
        if self.dense is not None:
            d["matrix"] = {"kind": "dense", "n": self.dense.n, "packed": self.dense.packed.tolist()}
        else:
            d["matrix"] = {
                "kind": "lowrank",
                "signs": self.lr_signs.tolist(),
                "vectors": self.lr_vectors.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinearCut":
        m = d["matrix"]
        if m["kind"] == "dense":
            dense = SymMat(m["n"], np.asarray(m["packed"]))
            return cls(d["family"], d["theta_coeff"], d["rhs"], d["birth_iteration"], dense=dense)
        return cls(
            d["family"],
            d["theta_coeff"],
            d["rhs"],
            d["birth_iteration"],
            lr_signs=np.asarray(m["signs"]),
            lr_vectors=np.asarray(m["vectors"]),
        )


@dataclass
class _Row:
    idx: np.ndarray
    val: np.ndarray
    rhs: float

    def to_dict(self) -> dict:
        return {"idx": self.idx.tolist(), "val": self.val.tolist(), "rhs": self.rhs}

    @classmethod
    def from_dict(cls, d: dict) -> "_Row":
        return cls(np.asarray(d["idx"], dtype=np.int64), np.asarray(d["val"], dtype=np.float64), d["rhs"])


@dataclass
class _AffExpr:
    """Affine scalar expression idx . val + const over the variable vector."""

    idx: np.ndarray
    val: np.ndarray
    const: float

    def to_dict(self) -> dict:
        return {"idx": self.idx.tolist(), "val": self.val.tolist(), "const": self.const}

    @classmethod
    def from_dict(cls, d: dict) -> "_AffExpr":
        return cls(np.asarray(d["idx"], dtype=np.int64), np.asarray(d["val"], dtype=np.float64), d["const"])


@dataclass
class ConeData:
    """Canonical minimize-sense cone program handed to a backend.

    Second-order cone blocks are (A, b) pairs meaning b - A x is in the cone
    of dimension len(b), first coordinate the bound.
    """

    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    a_ub: sp.csr_matrix
    b_ub: np.ndarray
    socs: list  # list of (csr_matrix, ndarray)

    @property
    def nvar(self) -> int:
        return self.c.shape[0]


@dataclass
class RawBackendResult:
    status: str  # one of the canonical STATUS_* strings
    x: np.ndarray | None
    objective: float
    solver_status: str = ""


class SolverBackend(abc.ABC):
    """Solves linear objectives over linear rows plus second-order cones.

    Implementations must be deterministic for identical inputs up to their
    feasibility tolerance and must not require semidefinite cone support.
    """

    name: str = "abstract"
    feasibility_tol: float = 1e-8

    @abc.abstractmethod
    def solve_cone(self, cone: ConeData) -> RawBackendResult:
        """Minimize cone.c over the canonical feasible region."""


class ConicProgram:
    """Master problem: matrix variable, auxiliaries, rows, cones, and cuts.

    Variable layout: packed upper triangle of X first, then auxiliary blocks
    in registration order. The program is a value type; the engine owns one
    instance and mutates it sequentially.
    """

    def __init__(self, n: int, sense: str = MIN):
        if n < 1:
            raise ValueError("order must be at least 1")
        if sense not in (MIN, MAX):
            raise ValueError(f"unknown sense {sense!r}")
        self.n = int(n)
        self.sense = sense
        self.trace_bound: float | None = None
        self.trace_mode: str | None = None
        self.ridge_gamma: float | None = None
        self._aux: list[tuple[str, int]] = []
        self._obj: dict[int, float] = {}
        self.eq_rows: list[_Row] = []
        self.ineq_rows: list[_Row] = []
        self.soc_blocks: list[list[_AffExpr]] = []
        self.cuts: list[LinearCut] = []
        self._cut_rows: list[_Row] = []

    # -- variable layout ---------------------------------------------------

    @property
    def num_matrix_vars(self) -> int:
        return packed_size(self.n)

    @property
    def nvar(self) -> int:
        return self.num_matrix_vars + sum(size for _, size in self._aux)

    @property
    def aux_blocks(self) -> list[tuple[str, int]]:
        return list(self._aux)

    def add_aux_block(self, name: str, size: int) -> int:
        """Register a scalar/vector auxiliary block; returns its offset."""
        if any(existing == name for existing, _ in self._aux):
            raise ValueError(f"auxiliary block {name!r} already exists")
        if size < 1:
            raise ValueError("auxiliary block size must be positive")
        offset = self.nvar
        self._aux.append((name, int(size)))
        return offset

    def aux_offset(self, name: str) -> int:
        offset = self.num_matrix_vars
        for existing, size in self._aux:
            if existing == name:
                return offset
            offset += size
        raise KeyError(f"no auxiliary block {name!r}")

    def aux_size(self, name: str) -> int:
        for existing, size in self._aux:
            if existing == name:
                return size
        raise KeyError(f"no auxiliary block {name!r}")

    def has_aux(self, name: str) -> bool:
        return any(existing == name for existing, _ in self._aux)

    def x_index(self, i: int, j: int) -> int:
        from .symla import packed_index

        return packed_index(self.n, i, j)

    # -- construction ------------------------------------------------------

    def _check_indices(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.nvar):
            raise ValueError("variable index out of range")
        return idx

    def add_objective_terms(self, idx, val) -> None:
        idx = self._check_indices(idx)
        val = np.asarray(val, dtype=np.float64)
        for i, v in zip(idx.tolist(), val.tolist()):
            self._obj[i] = self._obj.get(i, 0.0) + v

    def set_matrix_objective(self, c: SymMat) -> None:
        """Objective term <C, X> over the packed matrix variable."""
        if c.n != self.n:
            raise ValueError("objective matrix order mismatch")
        coeffs = packed_weights(self.n) * c.packed
        self.add_objective_terms(np.arange(self.num_matrix_vars), coeffs)

    def add_eq_row(self, idx, val, rhs: float) -> None:
        self.eq_rows.append(_Row(self._check_indices(idx), np.asarray(val, dtype=np.float64), float(rhs)))

    def add_ineq_row(self, idx, val, rhs: float) -> None:
        """Row idx . val <= rhs."""
        self.ineq_rows.append(_Row(self._check_indices(idx), np.asarray(val, dtype=np.float64), float(rhs)))

    def add_matrix_eq_row(self, a: SymMat, rhs: float) -> None:
        """Constraint <A, X> = rhs."""
        if a.n != self.n:
            raise ValueError("constraint matrix order mismatch")
        coeffs = packed_weights(self.n) * a.packed
        nz = np.nonzero(coeffs)[0]
        self.add_eq_row(nz, coeffs[nz], rhs)

    def add_soc_block(self, exprs: list[tuple]) -> None:
        """Block ||(e_1, ..., e_d)||_2 <= e_0 given as (idx, val, const) triples."""
        if len(exprs) < 2:
            raise ValueError("a second-order cone block needs a bound and a vector part")
        block = [
            _AffExpr(self._check_indices(idx), np.asarray(val, dtype=np.float64), float(const))
            for idx, val, const in exprs
        ]
        self.soc_blocks.append(block)

    # -- cuts ----------------------------------------------------------------

    def _cut_to_row(self, cut: LinearCut) -> _Row:
        coeffs = cut.packed_coefficients()
        idx = list(range(self.num_matrix_vars))
        val = list(coeffs)
        if cut.theta_coeff != 0.0:
            idx.append(self.aux_offset("theta"))
            val.append(cut.theta_coeff)
        return _Row(np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float64), cut.rhs)

    def append_cut(self, cut: LinearCut) -> None:
        if cut.order != self.n:
            raise ValueError(f"cut order {cut.order} does not match program order {self.n}")
        if cut.theta_coeff != 0.0 and not self.has_aux("theta"):
            raise ValueError("cut references theta but the program has no theta variable")
        self._cut_rows.append(self._cut_to_row(cut))
        self.cuts.append(cut)

    def remove_cuts(self, keep_mask) -> None:
        """Drop cuts where keep_mask is False (cut-retention policies)."""
        keep_mask = list(keep_mask)
        if len(keep_mask) != len(self.cuts):
            raise ValueError("mask length mismatch")
        self.cuts = [c for c, k in zip(self.cuts, keep_mask) if k]
        self._cut_rows = [r for r, k in zip(self._cut_rows, keep_mask) if k]

    # -- compilation ---------------------------------------------------------

    def _stack_rows(self, rows: list[_Row]) -> tuple[sp.csr_matrix, np.ndarray]:
        nvar = self.nvar
        if not rows:
            return sp.csr_matrix((0, nvar)), np.zeros(0)
        data = np.concatenate([r.val for r in rows])
        cols = np.concatenate([r.idx for r in rows])
        rownum = np.concatenate(
            [np.full(r.idx.shape[0], k, dtype=np.int64) for k, r in enumerate(rows)]
        )
        mat = sp.coo_matrix((data, (rownum, cols)), shape=(len(rows), nvar)).tocsr()
        rhs = np.array([r.rhs for r in rows])
        return mat, rhs

    def compile(self) -> ConeData:
        """Canonical minimize-sense arrays for a backend."""
        nvar = self.nvar
        c = np.zeros(nvar)
        for i, v in self._obj.items():
            c[i] = v
        if self.sense == MAX:
            c = -c
        a_eq, b_eq = self._stack_rows(self.eq_rows)
        a_ub, b_ub = self._stack_rows(self.ineq_rows + self._cut_rows)
        socs = []
        for block in self.soc_blocks:
            data = np.concatenate([e.val for e in block])
            cols = np.concatenate([e.idx for e in block])
            rownum = np.concatenate(
                [np.full(e.idx.shape[0], k, dtype=np.int64) for k, e in enumerate(block)]
            )
            # s = b - A x must reproduce each expression, so A = -coeffs.
            a_blk = sp.coo_matrix((-data, (rownum, cols)), shape=(len(block), nvar)).tocsr()
            b_blk = np.array([e.const for e in block])
            socs.append((a_blk, b_blk))
        return ConeData(c=c, a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub, socs=socs)

    # -- solution handling ---------------------------------------------------

    def unpack(self, x: np.ndarray) -> tuple[SymMat, dict]:
        xmat = SymMat(self.n, x[: self.num_matrix_vars])
        aux = {}
        offset = self.num_matrix_vars
        for name, size in self._aux:
            aux[name] = np.array(x[offset : offset + size])
            offset += size
        return xmat, aux

    def objective_value(self, x: np.ndarray) -> float:
        val = 0.0
        for i, v in self._obj.items():
            val += v * x[i]
        return val

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "n": self.n,
            "sense": self.sense,
            "trace_bound": self.trace_bound,
            "trace_mode": self.trace_mode,
            "ridge_gamma": self.ridge_gamma,
            "aux_blocks": [[name, size] for name, size in self._aux],
            "objective": {
                "idx": sorted(self._obj),
                "val": [self._obj[i] for i in sorted(self._obj)],
            },
            "eq_rows": [r.to_dict() for r in self.eq_rows],
            "ineq_rows": [r.to_dict() for r in self.ineq_rows],
            "soc_blocks": [[e.to_dict() for e in block] for block in self.soc_blocks],
            "cuts": [cut.to_dict() for cut in self.cuts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConicProgram":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {d.get('format_version')!r}")
        prog = cls(d["n"], d["sense"])
        prog.trace_bound = d["trace_bound"]
        prog.trace_mode = d["trace_mode"]
        prog.ridge_gamma = d["ridge_gamma"]
        for name, size in d["aux_blocks"]:
            prog.add_aux_block(name, size)
        prog.add_objective_terms(d["objective"]["idx"], d["objective"]["val"])
        prog.eq_rows = [_Row.from_dict(r) for r in d["eq_rows"]]
        prog.ineq_rows = [_Row.from_dict(r) for r in d["ineq_rows"]]
        prog.soc_blocks = [[_AffExpr.from_dict(e) for e in block] for block in d["soc_blocks"]]
        for cut_dict in d["cuts"]:
            prog.append_cut(LinearCut.from_dict(cut_dict))
        return prog


@dataclass
class BackendSolution:
    """Status-tagged master solution in the program's own objective sense."""

    status: str
    x_mat: SymMat | None
    aux: dict
    objective: float
    raw_status: str = ""

    def theta(self) -> float | None:
        if "theta" in self.aux:
            return float(self.aux["theta"][0])
        return None

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "status": self.status,
            "objective": self.objective,
            "raw_status": self.raw_status,
            "n": self.x_mat.n if self.x_mat is not None else None,
            "x_packed": self.x_mat.packed.tolist() if self.x_mat is not None else None,
            "aux": {name: values.tolist() for name, values in self.aux.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackendSolution":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {d.get('format_version')!r}")
        x_mat = None
        if d["x_packed"] is not None:
            x_mat = SymMat(d["n"], np.asarray(d["x_packed"]))
        aux = {name: np.asarray(vals, dtype=np.float64) for name, vals in d["aux"].items()}
        return cls(d["status"], x_mat, aux, d["objective"], d["raw_status"])


def add_cut(program: ConicProgram, cut: LinearCut) -> ConicProgram:
    """Append one cut; the program gains exactly one linear row."""
    program.append_cut(cut)
    return program


def evaluate_cut(cut: LinearCut, theta_hat: float | None, x_hat: SymMat) -> float:
    """a*theta + <G, X> - rhs at a candidate point; positive means violated."""
    if x_hat.n != cut.order:
        raise ValueError("cut and point orders differ")
    value = float(np.dot(cut.packed_coefficients(), x_hat.packed)) - cut.rhs
    if cut.theta_coeff != 0.0:
        if theta_hat is None:
            raise ValueError("cut references theta but no theta value was given")
        value += cut.theta_coeff * float(theta_hat)
    return value


def solve_master(backend: SolverBackend, program: ConicProgram) -> BackendSolution:
    """Solve the current master through the backend.

    Maximization programs are canonicalized to minimization internally; the
    reported objective is re-negated at this boundary. Backend exceptions
    surface as numerical_trouble with the raw message attached.
    """
    cone = program.compile()
    try:
        raw = backend.solve_cone(cone)
    except Exception as err:  # pragma: no cover - backend-specific breakage
        return BackendSolution(STATUS_NUMERICAL, None, {}, float("nan"), raw_status=str(err))
    if raw.status != STATUS_OPTIMAL or raw.x is None:
        return BackendSolution(raw.status, None, {}, float("nan"), raw_status=raw.solver_status)
    x_mat, aux = program.unpack(np.asarray(raw.x, dtype=np.float64))
    objective = program.objective_value(np.asarray(raw.x))
    return BackendSolution(STATUS_OPTIMAL, x_mat, aux, float(objective), raw_status=raw.solver_status)


def program_to_json(program: ConicProgram) -> str:
    return json.dumps(program.to_dict(), sort_keys=True)


def program_from_json(text: str) -> ConicProgram:
    return ConicProgram.from_dict(json.loads(text))


def solution_to_json(solution: BackendSolution) -> str:
    return json.dumps(solution.to_dict(), sort_keys=True)


def solution_from_json(text: str) -> BackendSolution:
    return BackendSolution.from_dict(json.loads(text))
