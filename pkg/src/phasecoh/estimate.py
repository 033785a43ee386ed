"""Coherence-constrained minimal average cost, its dual, bounds and the multi-copy comb programs.

Single-copy quantities optimize over MIO Choi matrices J (input = probe,
output = dimension M) with objective Tr[(ρ^T ⊗ Y) J]. The multi-copy
programs work on systems 0 (probe), 1, 2, ..., 2n where odd systems feed
the n phase gates and even systems receive their outputs.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .channels import mio_violation_mask
from .costfn import CostFunction, cost_matrix, fourier_coefficient
from .sdp import OPTIMAL, SolverFailure, relative_gap, run, solve_or_raise
from .states import as_array, l1_coherence, robustness_of_coherence, weight_of_coherence
from .tensorcore import ChoiMatrix, CMatrix, apply_choi, dephase_mask

X_CAP = 16
COMB_CAP = 64
SINGLE_TOL = 1e-6
COMB_TOL = 1e-4


class SizeCapError(ValueError):
    pass


@dataclass
class EstimationResult:
    value: float
    dual_value: float
    gap: float
    optimizer_choi: ChoiMatrix | None = None
    certificate: dict = field(default_factory=dict)
    status: str = OPTIMAL

    def to_json(self, with_optimizer: bool = False) -> dict:
        out = {"value": self.value, "dual": self.dual_value, "gap": self.gap, "status": self.status}
        if with_optimizer and self.optimizer_choi is not None:
            from .channels import choi_to_json

            out["optimizer"] = choi_to_json(self.optimizer_choi)
        return out


def _check_state(rho) -> np.ndarray:
    r = as_array(rho)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("state must be a square matrix")
    return r


def _as_cost(c) -> CostFunction:
    if isinstance(c, CostFunction):
        return c
    from .costfn import parse_cost

    return parse_cost(c)


# -- single copy ----------------------------------------------------------

_local = threading.local()


def _single_problem(d0: int, m: int):
    """Cached parametrized primal program for a (probe dim, output dim) pair; one cache per thread."""
    cache = getattr(_local, "single", None)
    if cache is None:
        cache = _local.single = {}
    key = (d0, m)
    if key not in cache:
        c = cp.Parameter((d0 * m, d0 * m), hermitian=True)
        j = cp.Variable((d0 * m, d0 * m), hermitian=True)
        mask = mio_violation_mask([d0], [m]).astype(float)
        tp = cp.partial_trace(j, [d0, m], axis=1) == np.eye(d0)
        cons = [j >> 0, tp]
        if mask.any():
            cons.append(cp.multiply(mask, j) == 0)
        prob = cp.Problem(cp.Minimize(cp.real(cp.trace(c @ j))), cons)
        cache[key] = (prob, c, j, tp)
    return cache[key]


def cmin_single(rho, c, m: int) -> EstimationResult:
    """min over MIO channels M of Tr[Y^(m) M(ρ)] as an SDP over the Choi matrix."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    r = _check_state(rho)
    c = _as_cost(c)
    y = cost_matrix(c, m)
    d0 = r.shape[0]
    prob, cpar, j, tp = _single_problem(d0, m)
    obj = np.kron(r.T, y.matrix)
    cpar.value = (obj + obj.conj().T) / 2
    status = run(prob, "cmin_single")
    if status != OPTIMAL:
        raise SolverFailure(f"cmin_single: status {status}", status, {"cvxpy_status": prob.status})
    value = float(prob.value)
    b = -np.asarray(tp.dual_value)
    dual = float(np.trace(b).real)
    gap = relative_gap(value, dual)
    jm = np.asarray(j.value)
    jm = (jm + jm.conj().T) / 2
    choi = ChoiMatrix(jm, ["in"], [d0], ["out"], [m])
    return EstimationResult(value, dual, gap, choi, {"B": b})


def cmin_dual(rho, c, m: int) -> EstimationResult:
    """max Tr B  s.t.  ρ^T ⊗ Y − B ⊗ 1 − (Δ_0 − Δ_{0,out})(A) ⪰ 0."""
    r = _check_state(rho)
    c = _as_cost(c)
    y = cost_matrix(c, m).matrix
    d0 = r.shape[0]
    n = d0 * m
    b = cp.Variable((d0, d0), hermitian=True)
    a = cp.Variable((n, n), hermitian=True)
    mask = mio_violation_mask([d0], [m]).astype(float)
    lhs = np.kron(r.T, y)
    lhs = (lhs + lhs.conj().T) / 2
    lmi = lhs - cp.kron(b, np.eye(m)) - cp.multiply(mask, a)
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(b))), [lmi >> 0])
    value = solve_or_raise(prob, "cmin_dual")
    primal = cmin_single(r, c, m).value
    return EstimationResult(value, value, relative_gap(primal, value), None,
                            {"A": np.asarray(a.value) * mask, "B": np.asarray(b.value), "primal": primal})


def advantage(rho, c, m: int) -> float:
    """A^(m)(ρ) = C₀ − C_min^(m)(ρ)."""
    c = _as_cost(c)
    return cost_matrix(c, m).c0 - cmin_single(rho, c, m).value


def cmin_unconstrained(c, m: int) -> float:
    return cost_matrix(_as_cost(c), m).lambda_min


def weight_bound(rho, c, m: int, weight: float | None = None) -> float:
    """λ_min + (C₀ − λ_min)(1 − W(ρ)), a lower bound on C_min."""
    y = cost_matrix(_as_cost(c), m)
    w = weight_of_coherence(rho) if weight is None else weight
    return y.lambda_min + (y.c0 - y.lambda_min) * (1 - w)


def qubit_exact(rho, c) -> float:
    """C₀ − (C₀ − λ_min(Y^(2)))·C_R(ρ) for a qubit probe."""
    r = _check_state(rho)
    if r.shape != (2, 2):
        raise ValueError("qubit_exact needs a qubit state")
    y = cost_matrix(_as_cost(c), 2)
    # robustness equals the l1 coherence for qubits
    return y.c0 - (y.c0 - y.lambda_min) * l1_coherence(r)


def qubit_exact_sdp(rho, c) -> float:
    """Same closed form but with the robustness computed by its own SDP."""
    y = cost_matrix(_as_cost(c), 2)
    return y.c0 - (y.c0 - y.lambda_min) * robustness_of_coherence(rho)


def j10_witness(rho, c, m: int) -> float:
    """2·max_{l>0}|Y_{0l}|·max_{i≠j}|ρ_ij|, a lower bound on the advantage."""
    r = _check_state(rho)
    y = cost_matrix(_as_cost(c), m).matrix
    off = np.abs(r - np.diag(np.diag(r))).max(initial=0.0)
    return 2 * np.abs(y[0, 1:]).max(initial=0.0) * off


# -- multi copy -----------------------------------------------------------

def reduce_copies(d: int, n: int) -> int:
    """M = (d−1)n + 1 phase multiples reachable with n copies of a d-level phase gate."""
    if d < 2 or n < 1:
        raise ValueError(f"need d >= 2 and n >= 1, got d={d}, n={n}")
    return (d - 1) * n + 1


def digit_sum(k: int, d: int, n: int) -> int:
    return sum((k // d ** i) % d for i in range(n))


@dataclass(frozen=True, eq=False)
class XMatrix:
    """X = ∫dφ/2π C(φ) J_φ^T over (odd systems, even systems)."""

    d: int
    n: int
    mat: CMatrix

    def interleaved(self) -> np.ndarray:
        """Matrix in system order 1, 2, 3, ..., 2n."""
        order = [lab for k in range(1, self.n + 1) for lab in (2 * k - 1, 2 * k)]
        return self.mat.reorder(order).mat


def x_matrix(c, d: int, n: int) -> XMatrix:
    """Entries c_{−(H(a)−H(b))} on |aa⟩⟨bb|_{odd,even}."""
    if d < 2 or n < 1:
        raise ValueError(f"need d >= 2 and n >= 1, got d={d}, n={n}")
    if d ** n > X_CAP:
        raise SizeCapError(f"d^n = {d ** n} exceeds the cap {X_CAP}")
    c = _as_cost(c)
    k = d ** n
    h = np.array([digit_sum(a, d, n) for a in range(k)])
    coeff = {s: fourier_coefficient(c, s) for s in range(-(d - 1) * n, (d - 1) * n + 1)}
    mat = np.zeros((k * k, k * k), dtype=complex)
    for a in range(k):
        for b in range(k):
            # odd digits are the first n systems; "a" in odd, "a" in even
            mat[a * k + a, b * k + b] = coeff[-(h[a] - h[b])]
    labels = [2 * i - 1 for i in range(1, n + 1)] + [2 * i for i in range(1, n + 1)]
    # base-d digits of a are most significant first, matching the label order
    return XMatrix(d, n, CMatrix(mat, labels, [d] * (2 * n)))


def _comb_layout(d0: int, d: int, n: int):
    dims = [d0] + [d] * (2 * n)
    size = int(np.prod(dims))
    if size > COMB_CAP:
        raise SizeCapError(f"comb dimension {size} exceeds the cap {COMB_CAP}")
    idx = np.indices(dims).reshape(len(dims), size)
    hodd = idx[1::2].sum(axis=0)
    same_h = (hodd[:, None] == hodd[None, :]).astype(float)
    dmasks = []
    for j in range(n):
        ev = list(range(0, 2 * j + 1, 2))
        od = list(range(1, 2 * j + 2, 2))
        m1 = dephase_mask(dims, ev)
        m2 = dephase_mask(dims, ev + od)
        dmasks.append(m1 - m2)
    return dims, size, same_h, dmasks


def _comb_objective(r: np.ndarray, c: CostFunction, d: int, n: int) -> np.ndarray:
    x = x_matrix(c, d, n).interleaved()
    m = reduce_copies(d, n)
    obj = m * np.kron(r.T, x)
    return (obj + obj.conj().T) / 2


def relaxed_comb_sdp(rho, c, d: int, n: int) -> EstimationResult:
    """Covariant subcomb program over K₀ on systems 0..2n.

    min M·Tr[(ρ^T ⊗ X) K₀] s.t. K₀ ⪰ 0, Σ_x Ũ_x† K₀ Ũ_x is a comb, and the
    dephasing constraints hold for the first n−1 levels. The covariant sum
    equals M·(K₀ masked to equal odd digit sums); its comb membership is
    imposed through the normalization hierarchy with free Hermitian R_j.
    """
    r = _check_state(rho)
    c = _as_cost(c)
    d0 = r.shape[0]
    dims, size, same_h, dmasks = _comb_layout(d0, d, n)
    m = reduce_copies(d, n)
    k = cp.Variable((size, size), hermitian=True)
    rs = [cp.Variable((d0 * d ** (2 * j + 1),) * 2, hermitian=True) for j in range(n)]
    s = m * cp.multiply(same_h, k)
    cons = [k >> 0, s == cp.kron(rs[n - 1], np.eye(d))]
    for j in range(n - 1, 0, -1):
        sub = [d0] + [d] * (2 * j + 1)
        cons.append(cp.partial_trace(rs[j], sub, axis=len(sub) - 1) == cp.kron(rs[j - 1], np.eye(d)))
    cons.append(cp.partial_trace(rs[0], [d0, d], axis=1) == np.eye(d0))
    for mask in dmasks:
        if mask.any():
            cons.append(cp.multiply(mask, k) == 0)
    obj = _comb_objective(r, c, d, n)
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(obj @ k))), cons)
    value = solve_or_raise(prob, "relaxed_comb_sdp")
    # dual value from the last normalization multiplier
    dual = float(-np.trace(np.asarray(cons[-1 - sum(1 for mk in dmasks if mk.any())].dual_value)).real)
    return EstimationResult(value, dual, relative_gap(value, dual), None, {"K0": np.asarray(k.value)})


def multicopy_dual_numeric(rho, c, d: int, n: int) -> float:
    """Dual of the covariant subcomb program.

    max Tr B_1 s.t. Tr_{2j} B_{j+1} = B_j ⊗ 1_{2j−1} (B_{j+1} on systems 0..2j)
    and M ρ^T ⊗ X − M·(B_{n+1} masked to equal odd digit sums) − Σ_j D_j(A_j) ⪰ 0.
    """
    r = _check_state(rho)
    c = _as_cost(c)
    d0 = r.shape[0]
    dims, size, same_h, dmasks = _comb_layout(d0, d, n)
    m = reduce_copies(d, n)
    bs = [cp.Variable((d0 * d ** (2 * j),) * 2, hermitian=True) for j in range(n + 1)]
    cons = []
    for j in range(1, n + 1):
        sub = [d0] + [d] * (2 * j)
        # B_{j+1} lives on 0..2j; tracing its last system leaves 0..2j−1
        cons.append(cp.partial_trace(bs[j], sub, axis=len(sub) - 1) == cp.kron(bs[j - 1], np.eye(d)))
    a_terms = 0
    for mask in dmasks:
        if mask.any():
            a = cp.Variable((size, size), hermitian=True)
            a_terms = a_terms + cp.multiply(mask, a)
    lmi = _comb_objective(r, c, d, n) - m * cp.multiply(same_h, bs[n]) - a_terms
    cons.append(lmi >> 0)
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(bs[0]))), cons)
    return solve_or_raise(prob, "multicopy_dual")


def digit_strings(d: int, n: int):
    return list(itertools.product(range(d), repeat=n))


def apply_optimizer(result: EstimationResult, rho) -> np.ndarray:
    """M*(ρ) for the optimal channel of a primal solve."""
    if result.optimizer_choi is None:
        raise ValueError("result carries no optimizer")
    return apply_choi(result.optimizer_choi, as_array(rho))
