"""Periodic cost functions and the Toeplitz cost matrices they induce.

Fourier coefficients follow ``c_k = ∫_0^{2π} dφ/2π C(φ) e^{iφk}`` and the cost
matrix of size M has entries ``Y[n, m] = c_{n-m}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

GRID_POINTS = 4096
BUILTINS = ("holevo", "window", "periodized-mse", "constant")


class BandwidthError(ValueError):
    pass


class CostSpecError(ValueError):
    pass


def _wrap(phi):
    """Map angles to [-π, π)."""
    return (np.asarray(phi, dtype=float) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class CostFunction:
    """A 2π-periodic cost C(φ), bounded below.

    ``kind`` is one of ``"fourier"`` (finite coefficient table), ``"sampled"``
    (callable evaluated on a uniform grid) or a builtin name. ``shift`` is
    added to the raw function so that it is nonnegative; every derived
    quantity (coefficients, cost matrix) refers to the shifted function.
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    coefficients: Mapping[int, complex] | None = None
    func: Callable | None = field(default=None, compare=False)
    order: int = GRID_POINTS
    shift: float = 0.0

    # -- construction -------------------------------------------------

    @classmethod
    def holevo(cls) -> "CostFunction":
        return cls("holevo")

    @classmethod
    def window(cls, delta: float) -> "CostFunction":
        if not 0 <= delta <= np.pi:
            raise CostSpecError(f"window half-width must lie in [0, π], got {delta}")
        return cls("window", {"delta": float(delta)})

    @classmethod
    def periodized_mse(cls) -> "CostFunction":
        return cls("periodized-mse")

    @classmethod
    def constant(cls, value: float) -> "CostFunction":
        return cls("constant", {"value": float(value)}, shift=max(0.0, -float(value)))

    @classmethod
    def from_coefficients(cls, coeffs: Mapping[int, complex]) -> "CostFunction":
        """Real cost from c_k for k >= 0 (negative k filled by conjugation)."""
        table: dict[int, complex] = {}
        for k, v in coeffs.items():
            k, v = int(k), complex(v)
            if k == 0 and abs(v.imag) > 1e-12:
                raise CostSpecError("c_0 must be real for a real-valued cost")
            if -k in table and abs(table[-k] - v.conjugate()) > 1e-12:
                raise CostSpecError(f"c_{-k} and c_{k} are not complex conjugates")
            table[k] = v
            table[-k] = v.conjugate()
        table[0] = complex(table.get(0, 0.0).real)
        draft = cls("fourier", coefficients=table)
        return cls("fourier", coefficients=table, shift=draft._shift_needed())

    @classmethod
    def sampled(cls, func: Callable, order: int = GRID_POINTS) -> "CostFunction":
        draft = cls("sampled", func=func, order=int(order))
        return cls("sampled", func=func, order=int(order), shift=draft._shift_needed())

    def _shift_needed(self) -> float:
        grid = np.linspace(0, 2 * np.pi, GRID_POINTS, endpoint=False)
        lo = float(np.min(self.raw(grid)))
        return max(0.0, -lo) if lo < 0 else 0.0

    # -- evaluation ---------------------------------------------------

    def raw(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.kind == "holevo":
            return 4 * np.sin(phi / 2) ** 2
        if self.kind == "window":
            return (np.abs(_wrap(phi)) > self.params["delta"]).astype(float)
        if self.kind == "periodized-mse":
            return _wrap(phi) ** 2
        if self.kind == "constant":
            return np.full_like(phi, self.params["value"])
        if self.kind == "fourier":
            ks = np.array(sorted(self.coefficients))
            cs = np.array([self.coefficients[k] for k in ks])
            # C(φ) = Σ_k c_k e^{-ikφ}
            return np.real(np.exp(-1j * np.multiply.outer(phi, ks)) @ cs)
        if self.kind == "sampled":
            return np.asarray(self.func(phi), dtype=float)
        raise CostSpecError(f"unknown cost kind {self.kind!r}")

    def __call__(self, phi):
        return self.raw(phi) + self.shift

    # -- Fourier data -------------------------------------------------

    def coefficient(self, k: int) -> complex:
        return fourier_coefficient(self, k)

    @property
    def is_even(self) -> bool:
        """True when C(φ) = C(-φ), i.e. all coefficients are real."""
        if self.kind in ("holevo", "window", "periodized-mse", "constant"):
            return True
        if self.kind == "fourier":
            return all(abs(v.imag) <= 1e-14 for v in self.coefficients.values())
        grid = np.linspace(0, 2 * np.pi, GRID_POINTS, endpoint=False)
        return bool(np.allclose(self.raw(grid), self.raw(-grid), atol=1e-12))

    # -- serialization ------------------------------------------------

    def to_json(self) -> dict:
        out = {"kind": self.kind, "params": dict(self.params)}
        if self.kind == "fourier":
            out["coefficients"] = {str(k): [v.real, v.imag] for k, v in sorted(self.coefficients.items()) if k >= 0}
        if self.kind == "sampled":
            raise CostSpecError("sampled cost functions wrap a callable and cannot be serialized")
        return out

    @classmethod
    def from_json(cls, obj) -> "CostFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj.get("kind")
        params = obj.get("params", {})
        if kind == "holevo":
            return cls.holevo()
        if kind == "window":
            return cls.window(params["delta"])
        if kind == "periodized-mse":
            return cls.periodized_mse()
        if kind == "constant":
            return cls.constant(params["value"])
        if kind == "fourier":
            raw = obj["coefficients"]
            return cls.from_coefficients({int(k): complex(*v) if isinstance(v, list) else complex(v) for k, v in raw.items()})
        raise CostSpecError(f"cannot build cost function from {obj!r}")


def parse_cost(spec: str) -> CostFunction:
    """Parse ``holevo``, ``window:<δ>``, ``periodized-mse``, ``constant:<c>`` or a JSON object."""
    spec = spec.strip()
    if spec.startswith("{"):
        try:
            return CostFunction.from_json(spec)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise CostSpecError(f"bad cost JSON: {exc}") from exc
    name, _, arg = spec.partition(":")
    try:
        if name == "holevo" and not arg:
            return CostFunction.holevo()
        if name == "periodized-mse" and not arg:
            return CostFunction.periodized_mse()
        if name == "window":
            return CostFunction.window(float(arg))
        if name == "constant":
            return CostFunction.constant(float(arg))
    except ValueError as exc:
        raise CostSpecError(f"bad cost parameter in {spec!r}: {exc}") from exc
    raise CostSpecError(f"unknown cost spec {spec!r}; expected one of {', '.join(BUILTINS)} or JSON")


def fourier_coefficient(c: CostFunction, k: int) -> complex:
    """c_k = ∫ dφ/2π C(φ) e^{iφk} of the shifted cost."""
    k = int(k)
    base = c.shift if k == 0 else 0.0
    if c.kind == "holevo":
        return complex({0: 2.0, 1: -1.0, -1: -1.0}.get(k, 0.0) + base)
    if c.kind == "window":
        delta = c.params["delta"]
        if k == 0:
            return complex(1 - delta / np.pi + base)
        return complex(-np.sin(k * delta) / (k * np.pi))
    if c.kind == "periodized-mse":
        if k == 0:
            return complex(np.pi ** 2 / 3 + base)
        return complex(2 * (-1) ** (k % 2) / k ** 2)
    if c.kind == "constant":
        return complex(c.params["value"] + base if k == 0 else 0.0)
    if c.kind == "fourier":
        return complex(c.coefficients.get(k, 0.0) + base)
    if c.kind == "sampled":
        n = c.order
        if 2 * abs(k) >= n:
            raise BandwidthError(f"|k|={abs(k)} exceeds the resolvable bandwidth of a {n}-point grid")
        grid = 2 * np.pi * np.arange(n) / n
        return complex(np.mean(c.raw(grid) * np.exp(1j * k * grid)) + base)
    raise CostSpecError(f"unknown cost kind {c.kind!r}")


def c_zero(c: CostFunction) -> float:
    return fourier_coefficient(c, 0).real


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Hermitian Toeplitz matrix Y with cached C₀, λ_min and its eigenvector."""

    m: int
    matrix: np.ndarray
    c0: float

    @cached_property
    def _eig(self):
        return np.linalg.eigh((self.matrix + self.matrix.conj().T) / 2)

    @property
    def lambda_min(self) -> float:
        return float(self._eig[0][0])

    @property
    def nu(self) -> np.ndarray:
        return self._eig[1][:, 0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "matrix": {"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()},
            "c0": self.c0,
            "lambda_min": self.lambda_min,
            "nu": {"re": self.nu.real.tolist(), "im": self.nu.imag.tolist()},
        }


def cost_matrix(c: CostFunction, m: int) -> CostMatrix:
    if m < 1:
        raise ValueError(f"cost matrix dimension must be >= 1, got {m}")
    coeffs = {k: fourier_coefficient(c, k) for k in range(-(m - 1), m)}
    idx = np.arange(m)
    diff = idx[:, None] - idx[None, :]
    y = np.vectorize(coeffs.__getitem__, otypes=[complex])(diff)
    y.setflags(write=False)
    return CostMatrix(m, y, c_zero(c))
