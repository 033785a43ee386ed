"""Choi matrices of channels, MIO membership and explicit MIO constructions."""
from __future__ import annotations

import json
from typing import Sequence

import cvxpy as cp
import numpy as np

from .sdp import solve_or_raise
from .tensorcore import ChoiMatrix, CMatrix, DimensionError, dephase_mask, link, partial_trace

MIO_TOL = 1e-9


class KrausError(ValueError):
    pass


class Measurement:
    """POVM given by a list of PSD effects summing to the identity."""

    __slots__ = ("effects",)

    def __init__(self, effects, tol: float = 1e-10):
        effects = [np.asarray(e.mat if isinstance(e, CMatrix) else e, dtype=complex) for e in effects]
        if not effects:
            raise ValueError("a measurement needs at least one effect")
        d = effects[0].shape[0]
        for e in effects:
            if e.shape != (d, d):
                raise DimensionError("all effects must share one dimension")
            if np.abs(e - e.conj().T).max() > 1e-12 or np.linalg.eigvalsh((e + e.conj().T) / 2).min() < -tol:
                raise ValueError("effects must be PSD")
        if np.abs(sum(effects) - np.eye(d)).max() > tol:
            raise ValueError("effects do not sum to the identity")
        self.effects = tuple(effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self):
        return len(self.effects)

    def probabilities(self, rho) -> np.ndarray:
        r = rho.mat if hasattr(rho, "mat") else np.asarray(rho)
        return np.array([np.trace(e @ r).real for e in self.effects])

    def as_channel(self, in_label=0, out_label="x") -> ChoiMatrix:
        """Measure-and-record channel ρ ↦ Σ_x Tr(E_x ρ)|x⟩⟨x|."""
        k = len(self.effects)
        j = sum(np.kron(e.T, np.diag(np.eye(k)[x])) for x, e in enumerate(self.effects))
        return ChoiMatrix(j, [in_label], [self.dim], [out_label], [k])


def choi_from_kraus(kraus, in_label=0, out_label=1, tol: float = 1e-10) -> ChoiMatrix:
    """J = Σ_k (1 ⊗ K_k)|Ω⟩⟨Ω|(1 ⊗ K_k)† with |Ω⟩ = Σ_n |nn⟩."""
    ks = [np.asarray(k.mat if isinstance(k, CMatrix) else k, dtype=complex) for k in kraus]
    if not ks:
        raise KrausError("empty Kraus list")
    d_out, d_in = ks[0].shape
    if any(k.shape != (d_out, d_in) for k in ks):
        raise DimensionError("Kraus operators have inconsistent shapes")
    if np.abs(sum(k.conj().T @ k for k in ks) - np.eye(d_in)).max() > tol:
        raise KrausError("Kraus operators are not trace preserving")
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in ks:
        # column (n) of the vectorized Kraus: |n⟩ ⊗ K|n⟩
        v = np.einsum("an->na", k).reshape(-1)
        j += np.outer(v, v.conj())
    return ChoiMatrix(j, [in_label], [d_in], [out_label], [d_out])


def unitary_choi(u, in_label=0, out_label=1) -> ChoiMatrix:
    return choi_from_kraus([u], in_label, out_label)


def identity_choi(d: int, in_label=0, out_label=1) -> ChoiMatrix:
    return unitary_choi(np.eye(d), in_label, out_label)


def dephasing_choi(d: int, in_label=0, out_label=1) -> ChoiMatrix:
    return choi_from_kraus([np.diag(np.eye(d)[i]) for i in range(d)], in_label, out_label)


def mio_violation_mask(in_dims: Sequence[int], out_dims: Sequence[int]) -> np.ndarray:
    """Entries of a Choi matrix (inputs first) that must vanish for MIO.

    Δ_in J = Δ_in Δ_out J forces J[(i,a),(i,b)] = 0 whenever a ≠ b.
    """
    k = len(in_dims)
    dims = list(in_dims) + list(out_dims)
    din = dephase_mask(dims, range(k))
    both = dephase_mask(dims, range(len(dims)))
    return (din - both).astype(bool)


def mio_residual(j: ChoiMatrix) -> float:
    mask = mio_violation_mask(j.in_dims, j.out_dims)
    return float(np.abs(j.mat[mask]).max(initial=0.0))


def is_mio(j: ChoiMatrix, tol: float = MIO_TOL) -> bool:
    return mio_residual(j) <= tol


def compose(first: ChoiMatrix, second: ChoiMatrix) -> ChoiMatrix:
    """Choi of second ∘ first; first's outputs must be second's inputs (matched by position)."""
    if first.out_dims != second.in_dims:
        raise DimensionError(f"cannot feed outputs {first.out_dims} into inputs {second.in_dims}")
    tags = [("_mid", i) for i in range(len(first.out_labels))]
    a = first.relabel(dict(zip(first.out_labels, tags)))
    b = second.relabel(dict(zip(second.in_labels, tags)))
    clash = set(a.in_labels) & set(b.out_labels)
    if clash:
        b = b.relabel({x: ("_out", x) for x in clash})
    out = link(a.op, b.op)
    j = ChoiMatrix.from_op(out, a.in_labels, b.out_labels)
    return j.relabel({("_out", x): x for x in clash}) if clash else j


def parallel(a: ChoiMatrix, b: ChoiMatrix) -> ChoiMatrix:
    """Choi of a ⊗ b (labels of a and b must be disjoint)."""
    from .tensorcore import tensor

    op = tensor(a.op, b.op)
    return ChoiMatrix.from_op(op, a.in_labels + b.in_labels, a.out_labels + b.out_labels)


def lemma11_channels(k: int, l: int, n: int, m: int, psi, phi, d1: int, d2: int, tol: float = 1e-10):
    """Pair (J_N, J_M) of MIO channels from system 1 into systems (2, B).

    Requires k ≠ l and |ψ⟩⟨ψ| + |φ⟩⟨φ| diagonal.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    phi = np.asarray(phi, dtype=complex).ravel()
    if k == l:
        raise ValueError("k and l must differ")
    if psi.shape != phi.shape:
        raise DimensionError("ψ and φ must live on the same system")
    if abs(np.linalg.norm(psi) - 1) > tol or abs(np.linalg.norm(phi) - 1) > tol:
        raise ValueError("ψ and φ must be normalized")
    if not (0 <= k < d1 and 0 <= l < d1 and 0 <= n < d2 and 0 <= m < d2):
        raise ValueError("basis index out of range")
    pp, ff = np.outer(psi, psi.conj()), np.outer(phi, phi.conj())
    s = pp + ff
    if np.abs(s - np.diag(np.diag(s))).max() > tol:
        raise ValueError("|ψ⟩⟨ψ| + |φ⟩⟨φ| must be diagonal in the incoherent basis")
    db = psi.size
    e1 = np.eye(d1)
    e12 = np.eye(d1 * d2)
    kn, lm = e12[k * d2 + n], e12[l * d2 + m]
    rest = np.eye(d1) - np.outer(e1[k], e1[k]) - np.outer(e1[l], e1[l])
    dkl = np.kron(np.kron(rest, np.eye(d2) / d2), np.eye(db) / db)
    diag_part = 0.5 * np.kron(np.outer(kn, kn) + np.outer(lm, lm), s)
    jn = dkl + diag_part + 0.5 * np.kron(np.outer(kn, lm) + np.outer(lm, kn), pp - ff)
    jm = dkl + diag_part + 0.5 * np.kron(np.outer(kn, lm) - np.outer(lm, kn),
                                         np.outer(psi, phi.conj()) - np.outer(phi, psi.conj()))
    mk = lambda mat: ChoiMatrix(mat, [1], [d1], [2, "B"], [d2, db])
    return mk(jn), mk(jm)


def bell_pair_states(i: int, j: int, dim: int):
    """ψ± = (|i⟩ ± |j⟩)/√2 on a system of dimension ``dim``."""
    e = np.eye(dim)
    return (e[i] + e[j]) / np.sqrt(2), (e[i] - e[j]) / np.sqrt(2)


def phase_unitary(d: int, phi: float) -> np.ndarray:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return np.diag(np.exp(1j * phi * np.arange(d)))


def phase_choi(d: int, phi: float, in_label=0, out_label=1) -> ChoiMatrix:
    return unitary_choi(phase_unitary(d, phi), in_label, out_label)


def qft(d: int) -> np.ndarray:
    """F|n⟩ = d^{-1/2} Σ_k e^{2πi kn/d}|k⟩."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)


def _random_incoherent_kraus(d_in: int, d_out: int, rng, terms: int | None = None):
    """Kraus operators Σ_i c_i|f(i)⟩⟨i| with f injective on each operator's support.

    Injectivity keeps Σ K†K diagonal, so column norms Σ_a |c_{a,i}|² = 1 give
    a trace-preserving set.
    """
    terms = terms or max(2, d_in)
    c = rng.normal(size=(terms, d_in)) + 1j * rng.normal(size=(terms, d_in))
    c /= np.linalg.norm(c, axis=0, keepdims=True)
    ks = []
    for a in range(terms):
        f = rng.integers(0, d_out, size=d_in)
        # split colliding inputs over separate operators
        seen: dict[int, int] = {}
        pieces: list[np.ndarray] = []
        for i in range(d_in):
            t = seen.get(int(f[i]), 0)
            seen[int(f[i])] = t + 1
            if t == len(pieces):
                pieces.append(np.zeros((d_out, d_in), dtype=complex))
            pieces[t][f[i], i] = c[a, i]
        ks.extend(pieces)
    return ks


def random_mio(d_in: int, d_out: int, mode: str = "kraus-family", seed=None, in_label=0, out_label=1) -> ChoiMatrix:
    """Random MIO channel.

    ``kraus-family`` draws incoherent Kraus operators |f(i)⟩⟨i| with random
    amplitudes. ``sdp-extremal`` maximizes a random linear functional over
    the CPTP ∩ MIO set, which lands on its boundary.
    """
    if d_in < 1 or d_out < 1:
        raise ValueError("dimensions must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if mode == "kraus-family":
        return choi_from_kraus(_random_incoherent_kraus(d_in, d_out, rng), in_label, out_label)
    if mode != "sdp-extremal":
        raise ValueError(f"unknown mode {mode!r}")
    n = d_in * d_out
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g = (g + g.conj().T) / 2
    j = cp.Variable((n, n), hermitian=True)
    mask = mio_violation_mask([d_in], [d_out])
    cons = [j >> 0, cp.partial_trace(j, [d_in, d_out], axis=1) == np.eye(d_in)]
    if mask.any():
        cons.append(cp.multiply(mask.astype(float), j) == 0)
    solve_or_raise(cp.Problem(cp.Maximize(cp.real(cp.trace(g @ j))), cons), "random_mio")
    return ChoiMatrix(_polish_choi(np.asarray(j.value), d_in, d_out, mask), [in_label], [d_in], [out_label], [d_out])


def _polish_choi(j: np.ndarray, d_in: int, d_out: int, mask: np.ndarray) -> np.ndarray:
    """Remove solver-level PSD, trace and MIO residue from a numerically optimal Choi matrix."""
    j = (j + j.conj().T) / 2
    j[mask] = 0
    w, v = np.linalg.eigh(j)
    j = (v * np.clip(w, 0, None)) @ v.conj().T
    t = np.einsum("iaja->ij", j.reshape(d_in, d_out, d_in, d_out))
    # Tr_out J stays diagonal-dominant; rescale by its inverse square root on the input
    w, v = np.linalg.eigh((t + t.conj().T) / 2)
    s = np.kron((v / np.sqrt(w)) @ v.conj().T, np.eye(d_out))
    j = s @ j @ s.conj().T
    j[mask] = 0
    j = (j + j.conj().T) / 2
    # masking can leave a tiny negative eigenvalue; mixing in the replacement
    # channel 1/d_out keeps trace preservation and MIO while restoring PSD
    low = np.linalg.eigvalsh(j).min()
    if low < 0:
        eps = min(1.0, -2 * low * d_out)
        j = (1 - eps) * j + eps * np.eye(d_in * d_out) / d_out
    return j


def choi_to_json(j: ChoiMatrix) -> dict:
    return {"in_dims": list(j.in_dims), "out_dims": list(j.out_dims), "dim": j.mat.shape[0],
            "re": j.mat.real.tolist(), "im": j.mat.imag.tolist()}


def choi_from_json(obj, in_labels=None, out_labels=None) -> ChoiMatrix:
    if isinstance(obj, str):
        obj = json.loads(obj)
    mat = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
    ind, outd = obj["in_dims"], obj["out_dims"]
    in_labels = in_labels or [f"in{i}" for i in range(len(ind))]
    out_labels = out_labels or [f"out{i}" for i in range(len(outd))]
    return ChoiMatrix(mat, in_labels, ind, out_labels, outd)


def output_state(j: ChoiMatrix, rho) -> np.ndarray:
    from .tensorcore import apply_choi

    return apply_choi(j, rho)


def trace_out(j: ChoiMatrix) -> np.ndarray:
    return partial_trace(j.op, j.out_labels).mat
