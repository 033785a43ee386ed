"""Executable protocols: the covariant optimal protocol, the multi-copy compilation network and textbook QPE."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channels import choi_from_kraus, phase_unitary, qft, unitary_choi
from .costfn import CostFunction
from .estimate import _as_cost, apply_optimizer, cmin_single, reduce_copies
from .states import DensityMatrix, as_array
from .tensorcore import ChoiMatrix, DimensionError

QUAD_POINTS = 2048
MAX_REGISTER = 256
QPE_MAX_T = 10


def _digits(k: int, d: int, width: int) -> tuple:
    """Base-d digits of k, least significant first."""
    out = []
    for _ in range(width):
        k, r = divmod(k, d)
        out.append(r)
    return tuple(out)


def _index(digits, d: int) -> int:
    return sum(int(x) * d**i for i, x in enumerate(digits))


@dataclass
class CompiledNetwork:
    """MIO network turning n uses of V_φ^(d) into one use of V_φ^(M), M = (d−1)n + 1.

    The register is l+1 qudits; basis index Σ_i k_i d^i, qudit 0 least significant.
    ``permutation[k]`` is the register string holding logical level k while the
    phase is imprinted.
    """

    d: int
    n: int
    m_target: int
    l: int
    m_prime: int
    copies_per_qudit: list
    permutation: np.ndarray
    embed: np.ndarray = field(repr=False)
    pi1: np.ndarray = field(repr=False)
    pi2: np.ndarray = field(repr=False)

    @property
    def register_dim(self) -> int:
        return self.d ** (self.l + 1)

    @property
    def n_qudits(self) -> int:
        return self.l + 1

    def weights(self) -> np.ndarray:
        """Phase multiplier m₀ + m₁d + ... + m_{l−1}d^{l−1} + m_l M′ of every register string."""
        mult = [self.d**i for i in range(self.l)] + [self.m_prime]
        return np.array([sum(a * b for a, b in zip(_digits(s, self.d, self.l + 1), mult))
                         for s in range(self.register_dim)])

    def permutation_unitary(self) -> np.ndarray:
        dim = self.register_dim
        u = np.zeros((dim, dim))
        u[self.permutation, np.arange(dim)] = 1
        return u

    def swap_unitary(self, i: int) -> np.ndarray:
        """Exchange qudit 0 with qudit i (identity for i = 0)."""
        dim = self.register_dim
        u = np.zeros((dim, dim))
        for s in range(dim):
            ds = list(_digits(s, self.d, self.l + 1))
            ds[0], ds[i] = ds[i], ds[0]
            u[_index(ds, self.d), s] = 1
        return u

    def slot_schedule(self) -> list:
        """Qudit index receiving each of the n copies, in application order."""
        return [q for q, c in enumerate(self.copies_per_qudit) for _ in range(c)]

    def slot_unitary(self, phi: float) -> np.ndarray:
        """One copy of V_φ^(d) acting on qudit 0 of the register."""
        rest = self.d**self.l
        return np.kron(np.eye(rest), phase_unitary(self.d, phi))

    def measure_kraus(self) -> list:
        """Π₁ plus one rank-one operator |0⟩⟨s| per surplus string s, so the map is trace preserving."""
        rest = [np.outer(self.pi2[:, s], np.eye(self.register_dim)[s]) for s in range(self.m_target, self.register_dim)]
        return [self.pi1] + rest

    def channels(self) -> list:
        """(name, Choi) of every fixed channel of the network, excluding the probed unitaries."""
        out = [("embed", choi_from_kraus([self.embed]))]
        out.append(("permute", unitary_choi(self.permutation_unitary())))
        for q in sorted(set(self.slot_schedule())):
            out.append((f"swap-0-{q}", unitary_choi(self.swap_unitary(q))))
        out.append(("unpermute", unitary_choi(self.permutation_unitary().T)))
        out.append(("measure", choi_from_kraus(self.measure_kraus())))
        return out


def compile_network(d: int, n: int) -> CompiledNetwork:
    if d < 2 or n < 1:
        raise ValueError(f"need d >= 2 and n >= 1, got d={d}, n={n}")
    l = 0
    while (d ** (l + 1) - 1) // (d - 1) <= n:
        l += 1
    m_prime = n - (d**l - 1) // (d - 1)
    dim = d ** (l + 1)
    if dim > MAX_REGISTER:
        raise ValueError(f"register dimension {dim} exceeds {MAX_REGISTER}")
    m = reduce_copies(d, n)
    copies = [d**i for i in range(l)] + [m_prime]

    mult = [d**i for i in range(l)] + [m_prime]
    weight = [sum(a * b for a, b in zip(_digits(s, d, l + 1), mult)) for s in range(dim)]
    # greedy matching: logical level k -> smallest unused string of weight k
    perm = -np.ones(dim, dtype=int)
    used = np.zeros(dim, dtype=bool)
    for k in range(m):
        s = next(s for s in range(dim) if weight[s] == k and not used[s])
        perm[_index(_digits(k, d, l + 1), d)] = s
        used[s] = True
    # surplus embedded strings fill the remaining strings in order
    free = iter(np.flatnonzero(~used))
    for s in range(dim):
        if perm[s] < 0:
            perm[s] = next(free)

    embed = np.zeros((dim, m))
    pi1 = np.zeros((m, dim))
    pi2 = np.zeros((m, dim))
    for k in range(m):
        embed[k, k] = 1  # the base-d digit string of k has index k
        pi1[k, k] = 1
    pi2[0, m:] = 1
    return CompiledNetwork(d, n, m, l, m_prime, copies, perm, embed, pi1, pi2)


def simulate_compiled(net: CompiledNetwork, phi: float, state) -> np.ndarray:
    """Run the network on a state of dimension M, one copy of V_φ^(d) at a time."""
    r = as_array(state)
    if r.shape != (net.m_target, net.m_target):
        raise DimensionError(f"input must be {net.m_target}x{net.m_target}, got {r.shape}")
    up = net.permutation_unitary()
    v = net.slot_unitary(phi)
    x = net.embed @ r @ net.embed.T
    x = up @ x @ up.T
    for q in net.slot_schedule():
        sw = net.swap_unitary(q)
        x = sw @ x @ sw.T
        x = v @ x @ v.conj().T
        x = sw.T @ x @ sw
    x = up.T @ x @ up
    return sum(k @ x @ k.T for k in net.measure_kraus())


def flip(m: int) -> np.ndarray:
    return np.eye(m)[::-1]


@dataclass
class ProtocolRun:
    """Covariant protocol: probe state, compiled network, Fourier measurement, estimates 2πx/M."""

    m: int
    probe: np.ndarray
    network: CompiledNetwork
    cost: CostFunction
    sdp_value: float
    average_cost: float = float("nan")

    @property
    def estimates(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.m) / self.m

    def probabilities(self, phi: float) -> np.ndarray:
        out = simulate_compiled(self.network, phi, self.probe)
        f = qft(self.m)
        p = np.einsum("kx,kl,lx->x", f.conj(), out, f).real
        return p

    def closed_form(self, phi: float) -> np.ndarray:
        """(1/M) Σ_{nm} σ_nm e^{i(n−m)(φ − 2πx/M)}."""
        n = np.arange(self.m)
        diff = np.subtract.outer(n, n)
        x = self.estimates
        ph = np.exp(1j * diff[None] * (phi - x)[:, None, None])
        return (ph * self.probe[None]).sum(axis=(1, 2)).real / self.m

    def quadrature_cost(self, points: int = QUAD_POINTS) -> float:
        grid = 2 * np.pi * np.arange(points) / points
        total = 0.0
        for phi in grid:
            p = self.probabilities(phi)
            total += float(np.dot(self.cost(phi - self.estimates), p))
        return total / points

    def to_csv(self, grid: int = 16) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        phis = 2 * np.pi * np.arange(grid) / grid
        w.writerow(["x", "estimate"] + [f"p(phi={p:.6f})" for p in phis])
        table = np.array([self.probabilities(p) for p in phis]).T
        for x in range(self.m):
            w.writerow([x, repr(float(self.estimates[x]))] + [repr(float(v)) for v in table[x]])
        return buf.getvalue()


def optimal_protocol(rho, c, d: int, n: int, points: int = QUAD_POINTS) -> ProtocolRun:
    """Optimal MIO preprocessing, then V_φ^(M) via the compiled network, then the Fourier POVM.

    The outcome statistics realize Σ_nm σ_nm c_{n−m} = Tr[Y^T σ]. For costs that are not
    even the probe is reflected n → M−1−n, an incoherent permutation, which maps
    this to Tr[Y σ*] with σ* the SDP optimum (Toeplitz matrices are persymmetric).
    """
    c = _as_cost(c)
    r = as_array(rho)
    m = reduce_copies(d, n)
    res = cmin_single(r, c, m)
    probe = apply_optimizer(res, r)
    if not c.is_even:
        j = flip(m)
        probe = j @ probe @ j
    probe = (probe + probe.conj().T) / 2
    run = ProtocolRun(m, probe, compile_network(d, n), c, res.value)
    run.average_cost = run.quadrature_cost(points) if points else float("nan")
    return run


def textbook_qpe(t: int, phi: float, trials: int = 0, seed=None) -> dict:
    """t qubits in |+⟩, controlled powers V^{2^j}, inverse QFT, computational readout.

    Returns the exact distribution over k, the best t-bit approximation of φ/2π,
    its probability and (when trials > 0) a sampled histogram.
    """
    if t < 1 or t > QPE_MAX_T:
        raise ValueError(f"t must lie in [1, {QPE_MAX_T}], got {t}")
    if trials < 0:
        raise ValueError("trials must be >= 0")
    dim = 2**t
    n = np.arange(dim)
    k = np.arange(dim)
    amp = np.exp(1j * np.outer(n, phi - 2 * np.pi * k / dim)).sum(axis=0) / dim
    probs = np.abs(amp) ** 2
    frac = (phi / (2 * np.pi)) % 1.0
    best = int(np.round(frac * dim)) % dim
    out = {"t": t, "phi": float(phi), "probabilities": probs, "best": best, "best_probability": float(probs[best])}
    if trials:
        rng = np.random.default_rng(seed)
        samples = rng.choice(dim, size=trials, p=probs / probs.sum())
        out["histogram"] = np.bincount(samples, minlength=dim)
    return out


def qpe_bound() -> float:
    return 4 / np.pi**2
