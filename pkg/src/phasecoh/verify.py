"""Numerical acceptance checks shared by the test suite and ``phasecoh verify``."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channels import mio_residual, phase_unitary, random_mio
from .combs import (bell_closed_form, extract_coherent_bit, fig10_superchannel, insert, is_mio_compatible,
                    miop_average_cost)
from .costfn import CostFunction, cost_matrix
from .estimate import (advantage, cmin_dual, cmin_single, j10_witness, multicopy_dual_numeric, qubit_exact,
                       reduce_copies, relaxed_comb_sdp, weight_bound)
from .protocol import compile_network, optimal_protocol, qpe_bound, simulate_compiled, textbook_qpe
from .tensorcore import apply_choi
from .states import isotropic, max_coherent, random_density, random_diagonal, weight_of_coherence

DEFAULT_SEED = 20240607


@dataclass
class Part:
    name: str
    error: float
    threshold: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error <= self.threshold


@dataclass
class CheckResult:
    number: int
    key: str
    title: str
    parts: list = field(default_factory=list)
    seconds: float = 0.0
    message: str = ""

    @property
    def passed(self) -> bool:
        return not self.message and all(p.ok for p in self.parts)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        worst = max(self.parts, key=lambda p: p.error / p.threshold if p.threshold else (np.inf if p.error else 0.0),
                    default=None)
        info = f"worst {worst.name}: {worst.error:.2e} <= {worst.threshold:.0e}" if worst else ""
        if self.message:
            info = self.message
        return f"[{tag}] {self.number:>2} {self.key:<18} {self.title} ({info}; {self.seconds:.1f}s)"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _bool(ok: bool) -> float:
    return 0.0 if ok else np.inf


# -- individual checks ----------------------------------------------------

def check_cost_matrix(tol, rng):
    h = CostFunction.holevo()
    y2 = cost_matrix(h, 2).matrix
    parts = [Part("Y(2) entries", float(np.abs(y2 - np.array([[2, -1], [-1, 2]])).max()), tol(1e-12))]
    lam_err = vec_err = 0.0
    prev = np.inf
    mono = True
    for m in range(2, 13):
        w, v = np.linalg.eigh(cost_matrix(h, m).matrix)
        lam_err = max(lam_err, abs(w[0] - 4 * np.sin(np.pi / (2 * (m + 1))) ** 2))
        prof = np.sin(np.pi * np.arange(1, m + 1) / (m + 1))
        prof /= np.linalg.norm(prof)
        vec_err = max(vec_err, 1 - abs(np.vdot(prof, v[:, 0])), np.abs(np.abs(v[:, 0]) - prof).max())
        mono &= w[0] < prev
        prev = w[0]
    parts += [Part("lambda_min closed form", lam_err, tol(1e-9)), Part("sine eigenvector", vec_err, tol(1e-8)),
              Part("lambda_min decreasing in M", _bool(mono), 0.0)]
    return parts


def check_single_routes(tol, rng):
    plus = np.full((2, 2), 0.5)
    h = CostFunction.holevo()
    primal = cmin_single(plus, h, 2).value
    dual = cmin_dual(plus, h, 2).value
    comb = relaxed_comb_sdp(plus, h, 2, 1).value
    return [Part("primal", abs(primal - 1), tol(1e-6)), Part("dual", abs(dual - 1), tol(1e-6)),
            Part("relaxed comb", abs(comb - 1), tol(1e-6))]


def check_qubit_closed_form(tol, rng):
    h = CostFunction.holevo()
    err = 0.0
    for _ in range(200):
        rho = random_density(2, seed=rng.integers(2**32))
        err = max(err, abs(cmin_single(rho, h, 2).value - qubit_exact(rho, h)))
    return [Part("200 random qubits", err, tol(1e-5))]


def check_sharpness(tol, rng):
    h = CostFunction.holevo()
    e_val = e_bound = 0.0
    for m in (2, 3, 5):
        y = cost_matrix(h, m)
        for p in (0, 0.25, 0.5, 0.75, 1):
            rho = isotropic(p, m)
            v = cmin_single(rho, h, m).value
            e_val = max(e_val, abs(v - (p * y.lambda_min + (1 - p) * y.c0)))
            e_bound = max(e_bound, abs(v - weight_bound(rho, h, m)))
    return [Part("isotropic closed form", e_val, tol(1e-5)), Part("weight bound tight", e_bound, tol(1e-5))]


def check_comb_oracle(tol, rng):
    h = CostFunction.holevo()
    e_comb = e_dual = 0.0
    for d, n in ((2, 1), (2, 2), (3, 1)):
        m = reduce_copies(d, n)
        for _ in range(20):
            rho = random_density(2, seed=rng.integers(2**32))
            single = cmin_single(rho, h, m).value
            e_comb = max(e_comb, _rel(relaxed_comb_sdp(rho, h, d, n).value, single))
            e_dual = max(e_dual, _rel(multicopy_dual_numeric(rho, h, d, n), single))
    return [Part("relaxed comb vs single copy", e_comb, tol(1e-4)),
            Part("multi-copy dual vs single copy", e_dual, tol(1e-4))]


def check_compilation(tol, rng):
    err = 0.0
    mio = 0.0
    for d, n in ((2, 2), (2, 3), (3, 2)):
        net = compile_network(d, n)
        m = net.m_target
        states = [max_coherent(m).mat] + [np.diag(np.eye(m)[k]) for k in range(m)]
        for phi in rng.uniform(0, 2 * np.pi, 20):
            v = phase_unitary(m, phi)
            for r in states:
                err = max(err, float(np.abs(simulate_compiled(net, phi, r) - v @ r @ v.conj().T).max()))
        mio = max([mio] + [mio_residual(ch) for _, ch in net.channels()])
    return [Part("network vs V_phi^(M)", err, tol(1e-12)), Part("constituent MIO residual", mio, tol(1e-9))]


def _bandlimited_cost(rng, degree: int = 2) -> CostFunction:
    coeffs = {0: 2.0}
    for k in range(1, degree + 1):
        coeffs[k] = complex(*rng.normal(scale=0.4 / k, size=2))
    return CostFunction.from_coefficients(coeffs)


def check_protocol(tol, rng):
    err = 0.0
    norm = 0.0
    cases = [(2, 1), (2, 2), (3, 1), (2, 3)]
    for i in range(20):
        d, n = cases[i % len(cases)]
        c = CostFunction.holevo() if i % 2 == 0 else _bandlimited_cost(rng)
        rho = random_density(int(rng.integers(2, 4)), seed=rng.integers(2**32))
        run = optimal_protocol(rho, c, d, n)
        err = max(err, abs(run.average_cost - run.sdp_value))
        for phi in np.linspace(0, 2 * np.pi, 8, endpoint=False):
            norm = max(norm, abs(run.probabilities(phi).sum() - 1))
    return [Part("quadrature cost vs SDP", err, tol(1e-6)), Part("normalization", norm, tol(1e-10))]


def check_monotone(tol, rng):
    h = CostFunction.holevo()
    d = 3
    states = [random_density(d, seed=rng.integers(2**32)) for _ in range(10)]
    ms = [2 + i % 3 for i in range(10)]
    adv = [advantage(s, h, m) for s, m in zip(states, ms)]
    mono = 0.0
    for i in range(30):
        mode = "kraus-family" if i % 2 == 0 else "sdp-extremal"
        ch = random_mio(d, d, mode=mode, seed=rng.integers(2**32))
        for s, m, a in zip(states, ms, adv):
            mono = max(mono, advantage(apply_choi(ch, s.mat), h, m) - a)
    conv = 0.0
    for _ in range(20):
        i, j = rng.choice(10, size=2, replace=False)
        m = ms[i]
        p = rng.uniform()
        mix = p * states[i].mat + (1 - p) * states[j].mat
        conv = max(conv, advantage(mix, h, m) - (p * adv[i] + (1 - p) * advantage(states[j], h, m)))
    diag = max(abs(advantage(random_diagonal(d, seed=rng.integers(2**32)), h, 2 + k % 3)) for k in range(10))
    wit = max(j10_witness(s, h, m) - a for s, m, a in zip(states, ms, adv))
    return [Part("monotonicity violation", max(mono, 0.0), tol(1e-6)), Part("convexity violation", max(conv, 0.0), tol(1e-6)),
            Part("A on diagonal states", diag, tol(1e-7)), Part("witness violation", max(wit, 0.0), tol(1e-6))]


def check_weight(tol, rng):
    h = CostFunction.holevo()
    e_w = 0.0
    for m in (2, 3, 5):
        for p in (0, 0.25, 0.5, 0.75, 1):
            e_w = max(e_w, abs(weight_of_coherence(isotropic(p, m)) - p))
    viol = 0.0
    for _ in range(200):
        rho = random_density(5, seed=rng.integers(2**32))
        viol = max(viol, weight_bound(rho, h, 5) - cmin_single(rho, h, 5).value)
    return [Part("isotropic weight", e_w, tol(1e-6)), Part("bound violation on d=5", max(viol, 0.0), tol(1e-6))]


def check_comb_toolkit(tol, rng):
    s = fig10_superchannel()
    parts = [Part("superchannel entries", float(np.abs(s.mat - bell_closed_form()).max()), tol(1e-12))]
    chk = is_mio_compatible(s)
    parts.append(Part("fails compatibility at j=0", _bool(not chk.ok and chk.level == 0), 0.0))
    res = 0.0
    for i in range(20):
        mode = "kraus-family" if i % 2 == 0 else "sdp-extremal"
        ch = random_mio(2, 2, mode=mode, seed=rng.integers(2**32), in_label=1, out_label=2)
        res = max(res, mio_residual(insert(s, ch)))
    parts.append(Part("images are MIO", res, tol(1e-9)))
    bit = extract_coherent_bit().mat
    parts.append(Part("coherent bit infidelity", float(1 - np.real(np.full(2, 2 ** -0.5) @ bit @ np.full(2, 2 ** -0.5))), tol(1e-12)))
    h = CostFunction.holevo()
    miop = max(abs(miop_average_cost(random_density(int(rng.integers(2, 4)), seed=rng.integers(2**32)), h, grid=256) - 1)
               for _ in range(20))
    parts.append(Part("MIOP average cost", miop, tol(1e-12)))
    return parts


def check_textbook_qpe(tol, rng):
    gap = 0.0
    exact = 0.0
    for t in range(4, 9):
        for phi in np.linspace(0, 2 * np.pi, 101):
            gap = max(gap, qpe_bound() - textbook_qpe(t, phi)["best_probability"])
        for k in range(2**t):
            q = textbook_qpe(t, 2 * np.pi * k / 2**t)
            exact = max(exact, 1 - q["probabilities"][k])
    return [Part("best approximation below 4/pi^2", max(gap, 0.0), tol(1e-9)),
            Part("representable phases", exact, tol(1e-12))]


CHECKS: dict[str, tuple[int, str, Callable]] = {
    "cost-matrix": (1, "Holevo cost matrix spectrum", check_cost_matrix),
    "single-routes": (2, "|+> value by primal, dual and comb SDP", check_single_routes),
    "qubit-closed-form": (3, "qubit closed form", check_qubit_closed_form),
    "sharpness": (4, "isotropic family and tight bound", check_sharpness),
    "comb-oracle": (5, "multi-copy reduction", check_comb_oracle),
    "compilation": (6, "multi-copy compilation network", check_compilation),
    "protocol": (7, "protocol simulation vs SDP", check_protocol),
    "monotone": (8, "advantage is a convex monotone", check_monotone),
    "weight": (9, "weight of coherence and bound", check_weight),
    "comb-toolkit": (10, "superchannel constructions", check_comb_toolkit),
    "textbook-qpe": (11, "textbook phase estimation", check_textbook_qpe),
}


def run_check(key: str, tol: float | None = None, seed: int = DEFAULT_SEED) -> CheckResult:
    number, title, fn = CHECKS[key]
    rng = np.random.default_rng([seed, number])
    thr = (lambda default: default) if tol is None else (lambda default: tol)
    res = CheckResult(number, key, title)
    t0 = time.perf_counter()
    try:
        res.parts = fn(thr, rng)
    except Exception as exc:  # a crashing check is a failing check
        res.message = f"{type(exc).__name__}: {exc}"
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(only=None, tol: float | None = None, seed: int = DEFAULT_SEED, report: Callable | None = None) -> list:
    keys = list(CHECKS) if not only else list(only)
    unknown = [k for k in keys if k not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(unknown)}")
    out = []
    for k in keys:
        r = run_check(k, tol, seed)
        if report:
            report(r)
        out.append(r)
    return out
