"""Density matrices and static coherence measures."""
from __future__ import annotations

import json

import cvxpy as cp
import numpy as np

from .sdp import SolverFailure, relative_gap, solve_or_raise
from .tensorcore import CMatrix

STATE_TOL = 1e-10


class DensityMatrix:
    """PSD unit-trace operator on a single labeled system."""

    __slots__ = ("op",)

    def __init__(self, mat, label=0, tol: float = STATE_TOL):
        mat = mat.mat if isinstance(mat, (CMatrix, DensityMatrix)) else np.asarray(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        if np.abs(mat - mat.conj().T).max() > 1e-12 * max(1.0, np.abs(mat).max()):
            raise ValueError("density matrix must be Hermitian")
        mat = (mat + mat.conj().T) / 2
        if abs(np.trace(mat) - 1) > tol:
            raise ValueError(f"density matrix must have unit trace, got {np.trace(mat).real:.3e}")
        if np.linalg.eigvalsh(mat).min() < -tol:
            raise ValueError("density matrix must be positive semidefinite")
        self.op = CMatrix(mat, [label], [mat.shape[0]])

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def to_json(self) -> dict:
        return {"dim": self.dim, "re": self.mat.real.tolist(), "im": self.mat.imag.tolist()}

    @classmethod
    def from_json(cls, obj) -> "DensityMatrix":
        if isinstance(obj, str):
            obj = json.loads(obj)
        mat = np.array(obj["re"], dtype=float) + 1j * np.array(obj.get("im", np.zeros_like(obj["re"])), dtype=float)
        if mat.shape != (obj["dim"], obj["dim"]):
            raise ValueError("declared dim does not match matrix shape")
        return cls(mat)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def as_array(rho) -> np.ndarray:
    if isinstance(rho, (DensityMatrix, CMatrix)):
        return rho.mat
    return np.asarray(rho, dtype=complex)


def max_coherent(d: int) -> DensityMatrix:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return DensityMatrix(np.full((d, d), 1.0 / d))


def maximally_mixed(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d) / d)


def isotropic(p: float, d: int) -> DensityMatrix:
    """p·Ψ⁺_d + (1−p)·1/d."""
    return DensityMatrix(p * max_coherent(d).mat + (1 - p) * np.eye(d) / d)


def l1_coherence(rho) -> float:
    r = as_array(rho)
    return float(np.abs(r).sum() - np.abs(np.diag(r)).sum())


def _weight_primal(r):
    d = r.shape[0]
    t = cp.Variable((d, d), hermitian=True)
    diag = cp.Variable(d, nonneg=True)
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(t))), [t >> 0, r - t == cp.diag(diag)])
    return prob, t, diag


def weight_decomposition(rho, tol: float = 1e-8):
    """Return (W, σ, τ) with ρ = (1−W)σ + Wτ, σ incoherent.

    σ (τ) is None when its weight vanishes. The value is cross-checked against
    the dual program max{1 − Tr Zρ : Z ⪰ 0, Δ(Z) ⪰ 1}. The diagonal constraint
    must be an inequality: pinning Δ(Z) = 1 gives a smaller number on generic
    mixed states, for which no decomposition of that weight exists.
    """
    r = as_array(rho)
    d = r.shape[0]
    if d == 1 or l1_coherence(r) <= 1e-14:
        return 0.0, DensityMatrix(np.diag(np.diag(r).real)), None
    prob, t, diag = _weight_primal(r)
    w = solve_or_raise(prob, "weight")
    z = cp.Variable((d, d), hermitian=True)
    dual = cp.Problem(cp.Maximize(1 - cp.real(cp.trace(z @ r))), [z >> 0, cp.real(cp.diag(z)) >= 1])
    wd = solve_or_raise(dual, "weight dual")
    if relative_gap(w, wd) > max(tol, 1e-7):
        raise SolverFailure(f"weight primal/dual disagree: {w} vs {wd}", diagnostics={"primal": w, "dual": wd})
    w = float(min(max(w, 0.0), 1.0)) if -1e-7 < w < 1 + 1e-7 else w
    tm = np.asarray(t.value)
    dm = np.diag(np.asarray(diag.value).real)
    sigma = DensityMatrix(dm / np.trace(dm).real, tol=1e-6) if np.trace(dm).real > 1e-9 else None
    tau = DensityMatrix(tm / np.trace(tm).real, tol=1e-6) if np.trace(tm).real > 1e-9 else None
    return w, sigma, tau


def weight_of_coherence(rho, tol: float = 1e-8) -> float:
    return weight_decomposition(rho, tol)[0]


def robustness_of_coherence(rho, tol: float = 1e-8) -> float:
    """C_R(ρ) = min{Tr D − 1 : D diagonal, D ⪰ ρ}, checked against max{Tr Zρ − 1 : Z ⪰ 0, Δ(Z) = 1}."""
    r = as_array(rho)
    d = r.shape[0]
    if d == 1 or l1_coherence(r) <= 1e-14:
        return 0.0
    diag = cp.Variable(d)
    prob = cp.Problem(cp.Minimize(cp.sum(diag) - 1), [cp.diag(diag) - r >> 0])
    val = solve_or_raise(prob, "robustness")
    z = cp.Variable((d, d), hermitian=True)
    dual = cp.Problem(cp.Maximize(cp.real(cp.trace(z @ r)) - 1), [z >> 0, cp.diag(z) == 1])
    vd = solve_or_raise(dual, "robustness dual")
    if relative_gap(val, vd) > max(tol, 1e-7):
        raise SolverFailure(f"robustness primal/dual disagree: {val} vs {vd}", diagnostics={"primal": val, "dual": vd})
    return val


def random_density(d: int, seed=None, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble state ρ = GG†/Tr(GG†)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_diagonal(d: int, seed=None) -> DensityMatrix:
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(d))
    return DensityMatrix(np.diag(p))


def random_pure(d: int, seed=None) -> DensityMatrix:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))
