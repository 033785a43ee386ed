"""Quantum combs: causal normalization, MIO-compatibility and link composition.

A comb lists its systems in causal order; even positions are inputs, odd
positions are outputs. Compositions that would need padding to keep this
alternation get trivial (dimension-1) systems inserted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import Measurement
from .costfn import CostFunction
from .states import DensityMatrix
from .tensorcore import (ChoiMatrix, CMatrix, DimensionError, LabelError, apply_choi, dephase_mask,
                         identity, link as link_op, partial_trace, tensor)

COMB_TOL = 1e-8


class CausalityError(ValueError):
    pass


@dataclass(frozen=True)
class CombCheck:
    """Outcome of a structural check; truthy iff the check passed."""

    ok: bool
    level: int | None = None
    residual: float = 0.0
    message: str = ""

    def __bool__(self):
        return self.ok


class Comb:
    """Positive operator over systems (in_0, out_0, in_1, out_1, ...)."""

    __slots__ = ("op",)

    def __init__(self, mat, labels: Sequence, dims: Sequence[int]):
        if len(labels) % 2:
            raise DimensionError("a comb needs an even number of systems (alternating input/output)")
        self.op = mat.reorder(labels) if isinstance(mat, CMatrix) else CMatrix(mat, labels, dims)

    @classmethod
    def from_choi(cls, j: ChoiMatrix) -> "Comb":
        if len(j.in_labels) != 1 or len(j.out_labels) != 1:
            j = _merge_choi(j)
        return cls(j.op, j.in_labels + j.out_labels, j.in_dims + j.out_dims)

    @property
    def labels(self) -> tuple:
        return self.op.labels

    @property
    def dims(self) -> tuple:
        return self.op.dims

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def slots(self) -> int:
        return len(self.labels) // 2 - 1

    @property
    def inputs(self) -> tuple:
        return self.labels[0::2]

    @property
    def outputs(self) -> tuple:
        return self.labels[1::2]

    def to_choi(self) -> ChoiMatrix:
        """View a slotless comb as a channel."""
        if self.slots != 0:
            raise ValueError("only a comb without slots is a channel")
        return ChoiMatrix(self.mat, [self.labels[0]], [self.dims[0]], [self.labels[1]], [self.dims[1]])

    def to_json(self) -> dict:
        return {"slots": self.slots, "dims": list(self.dims), "labels": [str(x) for x in self.labels],
                "re": self.mat.real.tolist(), "im": self.mat.imag.tolist()}

    @classmethod
    def from_json(cls, obj) -> "Comb":
        if isinstance(obj, str):
            obj = json.loads(obj)
        dims = obj["dims"]
        if len(dims) != 2 * obj["slots"] + 2:
            raise DimensionError("slots and dims disagree")
        mat = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
        labels = obj.get("labels") or list(range(len(dims)))
        return cls(mat, labels, dims)

    def __repr__(self):
        return f"Comb(labels={self.labels}, dims={self.dims})"


def _merge_choi(j: ChoiMatrix) -> ChoiMatrix:
    """Collapse several input (output) systems of a Choi matrix into one."""
    op = j.op.reorder(j.in_labels + j.out_labels)
    inl = j.in_labels[0] if len(j.in_labels) == 1 else tuple(j.in_labels)
    outl = j.out_labels[0] if len(j.out_labels) == 1 else tuple(j.out_labels)
    return ChoiMatrix(op.mat, [inl], [j.d_in], [outl], [j.d_out])


def _is_psd(m: np.ndarray, tol: float) -> tuple[bool, float]:
    w = np.linalg.eigvalsh((m + m.conj().T) / 2).min() if m.size else 0.0
    return w >= -tol, float(w)


def is_comb(mat, labels: Sequence | None = None, dims: Sequence[int] | None = None, tol: float = COMB_TOL) -> CombCheck:
    """Check positivity and the normalization hierarchy Tr_{2j+1} J^(j) = 1_{2j} ⊗ J^(j−1), Tr_1 J^(0) = 1_0.

    ``level`` in a failing result is the index j at which the hierarchy broke
    (or -1 for positivity).
    """
    if isinstance(mat, Comb):
        op = mat.op
    elif isinstance(mat, CMatrix):
        op = mat if labels is None else mat.reorder(labels)
    else:
        op = CMatrix(mat, labels, dims)
    labs = op.labels
    if len(labs) % 2:
        return CombCheck(False, None, np.inf, "odd number of systems")
    if np.abs(op.mat - op.mat.conj().T).max(initial=0.0) > tol:
        return CombCheck(False, -1, float(np.abs(op.mat - op.mat.conj().T).max()), "not Hermitian")
    ok, w = _is_psd(op.mat, 1e-9 * max(1.0, op.shape[0]))
    if not ok:
        return CombCheck(False, -1, -w, "not positive semidefinite")
    n = len(labs) // 2 - 1
    cur = op
    for j in range(n, -1, -1):
        t = partial_trace(cur, [labs[2 * j + 1]])
        if j == 0:
            res = float(np.abs(t.mat - np.eye(t.shape[0])).max(initial=0.0))
            if res > tol:
                return CombCheck(False, 0, res, "Tr_1 J^(0) differs from the identity")
            return CombCheck(True, None, res)
        d = op.dim(labs[2 * j])
        r = partial_trace(t, [labs[2 * j]]) * (1.0 / d)
        target = tensor(r, identity([labs[2 * j]], [d])).reorder(t.labels)
        res = float(np.abs(t.mat - target.mat).max(initial=0.0))
        if res > tol:
            return CombCheck(False, j, res, f"Tr_{{{labs[2 * j + 1]}}} J^({j}) does not factor as 1 ⊗ R")
        cur = r
    return CombCheck(True)


def mio_compatibility_residuals(c: Comb) -> list[float]:
    """max |Δ_{ins≤j} J − Δ_{ins≤j} Δ_{outs≤j} J| for every level j."""
    dims = c.dims
    out = []
    for j in range(c.slots + 1):
        ins = list(range(0, 2 * j + 1, 2))
        outs = list(range(1, 2 * j + 2, 2))
        din = dephase_mask(dims, ins).astype(bool)
        both = dephase_mask(dims, ins + outs).astype(bool)
        out.append(float(np.abs(c.mat[din & ~both]).max(initial=0.0)))
    return out


def is_mio_compatible(c: Comb, tol: float = 1e-9) -> CombCheck:
    for j, r in enumerate(mio_compatibility_residuals(c)):
        if r > tol:
            return CombCheck(False, j, r, f"dephasing inputs up to level {j} leaves output coherence")
    return CombCheck(True)


# -- composition ---------------------------------------------------------

def _roles(x) -> tuple[list, dict]:
    if isinstance(x, Comb):
        labs = list(x.labels)
        return labs, {lab: ("in" if i % 2 == 0 else "out") for i, lab in enumerate(labs)}
    if isinstance(x, ChoiMatrix):
        labs = list(x.in_labels) + list(x.out_labels)
        return labs, {**{lab: "in" for lab in x.in_labels}, **{lab: "out" for lab in x.out_labels}}
    raise TypeError(f"cannot link {type(x).__name__}")


def link(a, b):
    """Link product of two combs (or Choi matrices) respecting causal order.

    Shared systems must be an output of one operand and an input of the
    other. The result is ordered by a topological sort of both causal chains
    and padded with trivial systems so that inputs and outputs alternate; a
    slotless result is returned as a :class:`ChoiMatrix`.
    """
    la, ra = _roles(a)
    lb, rb = _roles(b)
    shared = [x for x in la if x in rb]
    for x in shared:
        if ra[x] == rb[x]:
            raise CausalityError(f"system {x!r} is an {ra[x]}put of both operands")
    # chain edges; Choi matrices order all inputs before all outputs
    succ: dict = {x: set() for x in la + lb}
    for labs in (la, lb):
        for p, q in zip(labs, labs[1:]):
            succ[p].add(q)
    order = _toposort(la + [x for x in lb if x not in la], succ)
    res = link_op(a.op, b.op)
    roles = {**ra, **rb}
    seq = [x for x in order if x not in shared]
    padded, dims = [], []
    want = "in"
    k = 0
    for x in seq:
        if roles[x] != want:
            padded.append(("_trivial", k))
            dims.append(1)
            k += 1
            want = "out" if want == "in" else "in"
        padded.append(x)
        dims.append(res.dim(x))
        want = "out" if want == "in" else "in"
    if want == "out":
        padded.append(("_trivial", k))
        dims.append(1)
    full = res
    for lab, d in zip(padded, dims):
        if lab not in full.labels:
            full = tensor(full, identity([lab], [1]))
    full = full.reorder(padded)
    if len(padded) == 2:
        return ChoiMatrix(full.mat, [padded[0]], [dims[0]], [padded[1]], [dims[1]])
    return Comb(full, padded, dims)


def _toposort(nodes: list, succ: dict) -> list:
    indeg = {x: 0 for x in nodes}
    for p in nodes:
        for q in succ[p]:
            indeg[q] += 1
    ready = [x for x in nodes if indeg[x] == 0]
    out = []
    while ready:
        x = ready.pop(0)
        out.append(x)
        for q in sorted(succ[x], key=nodes.index):
            indeg[q] -= 1
            if indeg[q] == 0:
                ready.append(q)
        ready.sort(key=nodes.index)
    if len(out) != len(nodes):
        raise CausalityError("composition creates a causal loop")
    return out


def comb_from_network(channels: Sequence[ChoiMatrix]) -> Comb | ChoiMatrix:
    """Contract a sequence of channels over their memory systems.

    Channel j maps (in_j, memory) to (out_j, memory'); memories are the
    labels shared between consecutive channels. The result lists
    in_0, out_0, in_1, out_1, ...
    """
    if not channels:
        raise ValueError("empty network")
    order = []
    acc = channels[0].op
    for j, ch in enumerate(channels):
        prev_out = set(channels[j - 1].out_labels) if j else set()
        nxt_in = set(channels[j + 1].in_labels) if j + 1 < len(channels) else set()
        ins = [x for x in ch.in_labels if x not in prev_out]
        outs = [x for x in ch.out_labels if x not in nxt_in]
        if len(ins) != 1 or len(outs) != 1:
            raise DimensionError(f"channel {j} must have exactly one open input and one open output")
        for x in ch.in_labels:
            if x in prev_out and channels[j - 1].op.dim(x) != ch.op.dim(x):
                raise DimensionError(f"memory system {x!r} dimension mismatch")
        order += [ins[0], outs[0]]
        if j:
            acc = link_op(acc, ch.op)
    acc = acc.reorder(order)
    if len(channels) == 1:
        return ChoiMatrix(acc.mat, [order[0]], [acc.dim(order[0])], [order[1]], [acc.dim(order[1])])
    return Comb(acc, order, acc.dims)


def insert(c: Comb, channel: ChoiMatrix) -> ChoiMatrix:
    """Plug a channel into a one-slot comb (out_0 → in_1) and return the resulting channel."""
    res = link(c, channel)
    if isinstance(res, ChoiMatrix):
        return res
    raise ValueError("result still has open slots")


# -- explicit superchannels ------------------------------------------------

def bell_vectors() -> dict:
    s = 1 / np.sqrt(2)
    return {"phi+": s * np.array([1, 0, 0, 1.0]), "phi-": s * np.array([1, 0, 0, -1.0]),
            "psi+": s * np.array([0, 1, 1, 0.0]), "psi-": s * np.array([0, 1, -1, 0.0])}


def bell_measurement() -> Measurement:
    b = bell_vectors()
    return Measurement([np.outer(b[k], b[k]) for k in ("phi+", "phi-", "psi+", "psi-")])


def fig10_superchannel(povm: Measurement | None = None, d0: int = 2) -> Comb:
    """Pre-process by discarding the input and sharing Φ⁺ on (1, A); post-process by measuring (2, A).

    The comb has systems (0, 1, 2, 3) with 3 carrying the outcome.
    """
    povm = povm or bell_measurement()
    if povm.dim != 4:
        raise DimensionError("the measurement must act on two qubits (2, A)")
    phi = bell_vectors()["phi+"]
    jn = tensor(identity([0], [d0]), CMatrix(np.outer(phi, phi), [1, "A"], [2, 2]))
    k = len(povm)
    jk = sum(np.kron(e.T, np.diag(np.eye(k)[i])) for i, e in enumerate(povm.effects))
    jk = CMatrix(jk, [2, "A", 3], [2, 2, k])
    res = link_op(jn, jk)
    return Comb(res.reorder([0, 1, 2, 3]), [0, 1, 2, 3], [d0, 2, 2, k])


def bell_closed_form(d0: int = 2) -> np.ndarray:
    """½·1_0 ⊗ Σ_i |β_i⟩⟨β_i|_{12} ⊗ |i⟩⟨i|_3 for the Bell basis (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻)."""
    b = bell_vectors()
    body = sum(np.kron(np.outer(b[k], b[k]), np.diag(np.eye(4)[i])) for i, k in enumerate(("phi+", "phi-", "psi+", "psi-")))
    return 0.5 * np.kron(np.eye(d0), body)


def coherent_bit_channel() -> ChoiMatrix:
    """MIO channel 1 → (2, B): Φ⁺ ⊗ |+⟩⟨+| + Φ⁻ ⊗ |−⟩⟨−|."""
    b = bell_vectors()
    plus, minus = np.full((2, 2), 0.5), np.array([[0.5, -0.5], [-0.5, 0.5]])
    j = np.kron(np.outer(b["phi+"], b["phi+"]), plus) + np.kron(np.outer(b["phi-"], b["phi-"]), minus)
    return ChoiMatrix(j, [1], [2], [2, "B"], [2, 2])


def coherent_bit_pipeline(d0: int = 2) -> dict:
    """Insert the coherent-bit channel into the Bell superchannel and post-process.

    Returns the linked operator on (0, 3, B), the outcome probabilities on 3
    and the final state on B after a Z correction conditioned on the outcome.
    """
    s = fig10_superchannel(d0=d0)
    jm = coherent_bit_channel()
    linked = link_op(s.op, jm.op).reorder([0, 3, "B"])
    chan = ChoiMatrix(linked.mat, [0], [d0], [3, "B"], [4, 2])
    rho0 = np.eye(d0) / d0
    out = CMatrix(apply_choi(chan, rho0), [3, "B"], [4, 2])
    z = np.diag([1.0, -1.0])
    final = np.zeros((2, 2), dtype=complex)
    probs = []
    for i in range(4):
        proj = np.kron(np.diag(np.eye(4)[i]), np.eye(2))
        branch = partial_trace(CMatrix(proj @ out.mat @ proj, [3, "B"], [4, 2]), [3]).mat
        probs.append(np.trace(branch).real)
        corr = z if i % 2 else np.eye(2)
        final += corr @ branch @ corr.conj().T
    return {"linked": linked, "probabilities": np.array(probs), "state": DensityMatrix(final, label="B")}


def coherent_bit_closed_form(d0: int = 2) -> np.ndarray:
    plus, minus = np.full((2, 2), 0.5), np.array([[0.5, -0.5], [-0.5, 0.5]])
    e0, e1 = np.diag(np.eye(4)[0]), np.diag(np.eye(4)[1])
    return 0.5 * np.kron(np.eye(d0), np.kron(e0, plus) + np.kron(e1, minus))


def extract_coherent_bit() -> DensityMatrix:
    return coherent_bit_pipeline()["state"]


def miop_phase_superchannel(d0: int = 2) -> Comb:
    """One-slot comb reading a qubit phase into a classical bit regardless of the probe.

    ½·1_0 ⊗ [(Φ⁺ + Ψ⁺)_{12} ⊗ |0⟩⟨0|_3 + (Φ⁻ + Ψ⁻)_{12} ⊗ |1⟩⟨1|_3].
    """
    b = bell_vectors()
    p = lambda k: np.outer(b[k], b[k])
    e0, e1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    body = np.kron(p("phi+") + p("psi+"), e0) + np.kron(p("phi-") + p("psi-"), e1)
    return Comb(0.5 * np.kron(np.eye(d0), body), [0, 1, 2, 3], [d0, 2, 2, 2])


def outcome_distribution(c: Comb, channel: ChoiMatrix, rho) -> np.ndarray:
    """p(x) from inserting ``channel`` into a one-slot comb with a classical last output."""
    ch = insert(c, channel)
    out = apply_choi(ch, rho.mat if hasattr(rho, "mat") else rho)
    return np.real(np.diag(out))


def miop_average_cost(rho, cost: Callable | CostFunction, grid: int = 2048, d0: int | None = None) -> float:
    """Average cost of the classical-bit superchannel with estimates πx, by trapezoid quadrature."""
    from .channels import phase_choi

    r = rho.mat if hasattr(rho, "mat") else np.asarray(rho)
    c = miop_phase_superchannel(d0 or r.shape[0])
    total = 0.0
    for phi in 2 * np.pi * np.arange(grid) / grid:
        p = outcome_distribution(c, phase_choi(2, phi, 1, 2), r)
        total += sum(p[x] * float(cost(phi - np.pi * x)) for x in range(2))
    return total / grid
