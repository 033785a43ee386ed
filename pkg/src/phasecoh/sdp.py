"""Linear objectives over PSD cones with affine equality constraints.

Problems are posed over real symmetric blocks; complex Hermitian problems go
through :func:`realify`. Solving is delegated to an interior-point solver via
cvxpy. The same status/gap bookkeeping is reused by the richer problems in
:mod:`phasecoh.estimate`, which are written directly as cvxpy expressions.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import cvxpy as cp
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
SOLVER = "CLARABEL"
SOLVER_OPTS = {"tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "tol_feas": 1e-8, "max_iter": 400}

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"


class SolverFailure(RuntimeError):
    """Raised when a solve does not end in a certified optimum."""

    def __init__(self, message, status=NUMERICAL_FAILURE, diagnostics=None):
        super().__init__(message)
        self.status = status
        self.diagnostics = diagnostics or {}


def realify(h) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian H."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if h.size and np.abs(h - h.conj().T).max() > 1e-12 * max(1.0, np.abs(h).max()):
        raise ValueError("realify requires a Hermitian matrix")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def derealify(x) -> np.ndarray:
    """Hermitian matrix represented by a real symmetric 2n×2n block matrix."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0] // 2
    x11, x12, x21, x22 = x[:n, :n], x[:n, n:], x[n:, :n], x[n:, n:]
    return (x11 + x22) / 2 + 1j * (x21 - x12) / 2


@dataclass(frozen=True)
class SdpProblem:
    """min/max Σ_b <C_b, X_b>  s.t.  Σ_b <A_ib, X_b> = b_i,  X_b ⪰ 0."""

    blocks: tuple
    objective: tuple
    constraints: tuple = ()
    sense: str = "min"

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        obj = tuple(np.asarray(c, dtype=float) for c in self.objective)
        cons = tuple((tuple(np.asarray(a, dtype=float) for a in mats), float(rhs)) for mats, rhs in self.constraints)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if len(obj) != len(blocks):
            raise ValueError("one objective matrix per block required")
        for mats in [obj] + [m for m, _ in cons]:
            if len(mats) != len(blocks):
                raise ValueError("constraint must give one matrix per block")
            for a, n in zip(mats, blocks):
                if a.shape != (n, n):
                    raise ValueError(f"matrix of shape {a.shape} in block of size {n}")
                if np.abs(a - a.T).max(initial=0.0) > 1e-12:
                    raise ValueError("constraint and objective matrices must be symmetric")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "constraints", cons)

    def dump(self) -> str:
        """Sparse plain-text dump in SDPA layout (1-based block/row/col triplets)."""
        lines = [f"{len(self.constraints)}", f"{len(self.blocks)}", " ".join(str(b) for b in self.blocks)]
        sign = 1.0 if self.sense == "max" else -1.0
        # SDPA maximizes <F0, Y>; rhs vector is the c of its dual
        lines.append(" ".join(repr(rhs) for _, rhs in self.constraints))
        mats = [tuple(sign * c for c in self.objective)] + [m for m, _ in self.constraints]
        for k, per_block in enumerate(mats):
            for b, a in enumerate(per_block):
                rows, cols = np.nonzero(np.triu(a))
                for i, j in zip(rows, cols):
                    lines.append(f"{k} {b + 1} {i + 1} {j + 1} {float(a[i, j])!r}")
        return "\n".join(lines) + "\n"


@dataclass
class SdpSolution:
    primal: float
    dual: float
    optimizers: list
    status: str
    gap: float
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def relative_gap(primal: float, dual: float) -> float:
    return abs(primal - dual) / (1 + abs(primal))


def run(problem: cp.Problem, label: str = "sdp") -> str:
    """Solve a cvxpy problem and map its status onto ours."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            problem.solve(solver=SOLVER, **SOLVER_OPTS)
    except cp.error.SolverError as exc:
        log.warning("%s: solver error %s", label, exc)
        return NUMERICAL_FAILURE
    st = problem.status
    if st == cp.OPTIMAL:
        return OPTIMAL
    if st in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return INFEASIBLE
    if st in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return UNBOUNDED
    if st == cp.OPTIMAL_INACCURATE:
        # accept only if a retry with the fallback solver confirms it
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem.solve(solver="SCS", eps=1e-9, max_iters=200000)
        except cp.error.SolverError:
            return NUMERICAL_FAILURE
        return OPTIMAL if problem.status == cp.OPTIMAL else NUMERICAL_FAILURE
    return NUMERICAL_FAILURE


def solve(p: SdpProblem, tol: float = DEFAULT_TOL) -> SdpSolution:
    xs = [cp.Variable((n, n), PSD=True) for n in p.blocks]

    def inner(mats):
        return sum(cp.trace(a @ x) for a, x in zip(mats, xs))

    cons = [inner(mats) == rhs for mats, rhs in p.constraints]
    obj = inner(p.objective)
    prob = cp.Problem(cp.Minimize(obj) if p.sense == "min" else cp.Maximize(obj), cons)
    status = run(prob)
    if status != OPTIMAL:
        return SdpSolution(np.nan, np.nan, [], status, np.inf, np.inf, {"cvxpy_status": prob.status})
    primal = float(prob.value)
    ys = np.array([float(c.dual_value) for c in cons])
    rhs = np.array([r for _, r in p.constraints])
    # cvxpy reports equality multipliers with the sign of  f - y·(Ax - b)
    dual = float(-(ys @ rhs)) if p.sense == "min" else float(ys @ rhs)
    opt = [np.asarray(x.value) for x in xs]
    res = max((abs(sum(np.sum(a * x) for a, x in zip(mats, opt)) - r) for mats, r in p.constraints), default=0.0)
    min_eig = min((np.linalg.eigvalsh(x).min() for x in opt), default=0.0)
    gap = relative_gap(primal, dual)
    diag = {"constraint_residual": res, "min_eigenvalue": float(min_eig)}
    if gap > max(tol, 1e-7) or res > 1e-7 or min_eig < -1e-8:
        return SdpSolution(primal, dual, opt, NUMERICAL_FAILURE, gap, res, diag)
    return SdpSolution(primal, dual, opt, OPTIMAL, gap, res, diag)


def hermitian_problem(blocks: Sequence[int], objective, constraints, sense: str = "min") -> SdpProblem:
    """Build an SdpProblem from complex Hermitian data via :func:`realify`.

    Objectives are halved because Tr(realify(A) realify(B)) = 2 Re Tr(AB);
    constraint rows are halved for the same reason.
    """
    obj = [realify(c) / 2 for c in objective]
    cons = [([realify(a) / 2 for a in mats], rhs) for mats, rhs in constraints]
    return SdpProblem(tuple(2 * n for n in blocks), tuple(obj), tuple(cons), sense)


def solve_or_raise(problem: cp.Problem, label: str = "sdp") -> float:
    """Run a cvxpy problem; return its optimal value or raise :class:`SolverFailure`."""
    status = run(problem, label)
    if status != OPTIMAL:
        raise SolverFailure(f"{label}: solver ended with status {status} ({problem.status})", status,
                            {"cvxpy_status": problem.status})
    return float(problem.value)
