"""Command-line front end: ``phasecoh {cost-matrix,cmin,sweep,verify}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costfn import CostFunction, CostSpecError, cost_matrix, parse_cost
from .estimate import SizeCapError, advantage, cmin_single, qubit_exact, reduce_copies, weight_bound
from .sdp import SolverFailure, relative_gap
from .states import (DensityMatrix, isotropic, max_coherent, maximally_mixed, random_density, random_diagonal,
                     random_pure, robustness_of_coherence, weight_of_coherence)
from .verify import CHECKS, DEFAULT_SEED, run_checks

log = logging.getLogger("phasecoh")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
MAX_DIM = 16
MAX_COUNT = 10_000
ENSEMBLES = ("ginibre", "pure", "diagonal", "isotropic")
SWEEP_COLUMNS = ["index", "W", "CR_scaled", "cmin", "weight_bound", "advantage", "status"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    cost: CostFunction | None = None
    m: int | None = None
    d: int | None = None
    n: int | None = None
    state: DensityMatrix | None = None
    ensemble: str = "ginibre"
    count: int = 200
    seed: int = DEFAULT_SEED
    out: Path | None = None
    svg: Path | None = None
    tol: float | None = None
    jobs: int = 1
    only: list = field(default_factory=list)


# -- parsing ---------------------------------------------------------------

def parse_state(spec: str) -> DensityMatrix:
    """A JSON file, or one of plus, max-coherent:M, mixed:M, isotropic:p:M, diag:p0,p1,..., ginibre:d:seed."""
    if os.path.exists(spec):
        try:
            return DensityMatrix.from_json(Path(spec).read_text())
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read state file {spec}: {exc}") from exc
    name, _, arg = spec.partition(":")
    args = arg.split(":") if arg else []
    try:
        if name == "plus" and not args:
            return max_coherent(2)
        if name == "max-coherent":
            return max_coherent(int(args[0]))
        if name == "mixed":
            return maximally_mixed(int(args[0]))
        if name == "isotropic":
            return isotropic(float(args[0]), int(args[1]))
        if name == "diag":
            return DensityMatrix(np.diag([float(x) for x in args[0].split(",")]))
        if name == "ginibre":
            return random_density(int(args[0]), seed=int(args[1]))
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad state spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown state spec {spec!r} (file not found either)")


def _cost(spec: str) -> CostFunction:
    if os.path.exists(spec):
        spec = Path(spec).read_text()
    try:
        return parse_cost(spec)
    except CostSpecError as exc:
        raise ConfigError(str(exc)) from exc


def _env_seed() -> int:
    raw = os.environ.get("PHASECOH_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"PHASECOH_SEED must be an integer, got {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasecoh", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, state=True):
        sp.add_argument("--cost", default="holevo", help="holevo | window:<delta> | periodized-mse | constant:<c> | JSON | file")
        sp.add_argument("--m", type=int, help="cost-matrix size M")
        sp.add_argument("--d", type=int, help="dimension of the probed phase unitary")
        sp.add_argument("--n", type=int, help="number of uses of the phase unitary; M = (d-1)n + 1")
        if state:
            sp.add_argument("--state", help="state spec or JSON file")
        sp.add_argument("--out", type=Path, help="output path (default: stdout)")
        sp.add_argument("--tol", type=float)

    common(sub.add_parser("cost-matrix", help="write Y^(M), C0, lambda_min and its eigenvector as JSON"), state=False)
    common(sub.add_parser("cmin", help="minimal average cost of one state as JSON"))
    sw = sub.add_parser("sweep", help="random-state sweep as CSV (+ optional SVG)")
    common(sw, state=False)
    sw.add_argument("--ensemble", default="ginibre", choices=ENSEMBLES)
    sw.add_argument("--count", type=int, default=200)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--svg", type=Path)
    sw.add_argument("--jobs", type=int, default=1)
    vf = sub.add_parser("verify", help="run the acceptance checks")
    vf.add_argument("--only", action="append", default=[], help=f"comma-separated subset of: {', '.join(CHECKS)}")
    vf.add_argument("--tol", type=float)
    vf.add_argument("--seed", type=int)
    return p


def make_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.command)
    seed = getattr(ns, "seed", None)
    cfg.seed = _env_seed() if seed is None else seed
    cfg.tol = getattr(ns, "tol", None)
    if cfg.tol is not None and not cfg.tol > 0:
        raise ConfigError("--tol must be positive")
    cfg.out = getattr(ns, "out", None)
    if ns.command == "verify":
        cfg.only = [k.strip() for item in ns.only for k in item.split(",") if k.strip()]
        bad = [k for k in cfg.only if k not in CHECKS]
        if bad:
            raise ConfigError(f"unknown check(s) {bad}; choose from {', '.join(CHECKS)}")
        return cfg
    cfg.cost = _cost(ns.cost)
    cfg.d, cfg.n, cfg.m = ns.d, ns.n, ns.m
    if cfg.n is not None:
        if cfg.d is None:
            raise ConfigError("--n needs --d")
        try:
            m = reduce_copies(cfg.d, cfg.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.m is not None and cfg.m != m:
            raise ConfigError(f"--m {cfg.m} contradicts (d-1)n+1 = {m}")
        cfg.m = m
    if ns.command == "sweep":
        cfg.ensemble, cfg.count, cfg.svg, cfg.jobs = ns.ensemble, ns.count, ns.svg, ns.jobs
        cfg.d = cfg.d if cfg.d is not None and cfg.n is None else 5
        cfg.m = cfg.m or cfg.d
        if not 1 <= cfg.count <= MAX_COUNT:
            raise ConfigError(f"--count must lie in [1, {MAX_COUNT}]")
        if cfg.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if not 1 <= cfg.d <= MAX_DIM:
            raise ConfigError(f"state dimension must lie in [1, {MAX_DIM}]")
    if ns.command == "cmin":
        if not ns.state:
            raise ConfigError("cmin needs --state")
        cfg.state = parse_state(ns.state)
        cfg.m = cfg.m or cfg.state.dim
    if cfg.m is None:
        raise ConfigError("give --m, or --d and --n")
    if not 1 <= cfg.m <= MAX_DIM:
        raise ConfigError(f"M must lie in [1, {MAX_DIM}]")
    return cfg


# -- commands --------------------------------------------------------------

def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_cost_matrix(cfg: RunConfig) -> int:
    y = cost_matrix(cfg.cost, cfg.m)
    payload = {"cost": cfg.cost.to_json() if cfg.cost.kind != "sampled" else None, **y.to_json()}
    _emit(json.dumps(payload, indent=2) + "\n", cfg.out)
    return EXIT_OK


def cmd_cmin(cfg: RunConfig) -> int:
    rho, c, m = cfg.state, cfg.cost, cfg.m
    tol = cfg.tol or 1e-6
    res = cmin_single(rho, c, m)
    y = cost_matrix(c, m)
    bound = weight_bound(rho, c, m)
    payload = {"m": m, "state_dim": rho.dim, "cmin": res.value, "advantage": y.c0 - res.value, "dual": res.dual_value,
               "gap": res.gap, "weight_bound": bound, "c0": y.c0, "lambda_min": y.lambda_min}
    if rho.dim == 2 and m == 2:
        payload["qubit_exact"] = qubit_exact(rho, c)
    problems = []
    if res.gap > tol:
        problems.append(f"duality gap {res.gap:.2e} exceeds {tol:.0e}")
    if bound > res.value + tol:
        problems.append(f"weight bound {bound} exceeds cmin {res.value}")
    if "qubit_exact" in payload and abs(payload["qubit_exact"] - res.value) > max(tol, 1e-5):
        problems.append("qubit closed form disagrees with the SDP")
    if not y.lambda_min - tol <= res.value <= y.c0 + tol:
        problems.append("cmin outside [lambda_min, C0]")
    if problems:
        for msg in problems:
            log.error(msg)
        return EXIT_VERIFY
    _emit(json.dumps(payload, indent=2) + "\n", cfg.out)
    return EXIT_OK


def sample_state(ensemble: str, d: int, seed: int, index: int) -> DensityMatrix:
    key = [seed, index]
    if ensemble == "ginibre":
        return random_density(d, seed=key)
    if ensemble == "pure":
        return random_pure(d, seed=key)
    if ensemble == "diagonal":
        return random_diagonal(d, seed=key)
    if ensemble == "isotropic":
        return isotropic(float(np.random.default_rng(key).uniform()), d)
    raise ConfigError(f"unknown ensemble {ensemble!r}")


def sweep_row(args) -> dict:
    ensemble, d, m, cost_json, seed, index = args
    c = CostFunction.from_json(cost_json)
    row = {"index": index}
    try:
        rho = sample_state(ensemble, d, seed, index)
        w = weight_of_coherence(rho)
        cr = robustness_of_coherence(rho)
        val = cmin_single(rho, c, m).value
        row.update(W=w, CR_scaled=cr / (d - 1) if d > 1 else 0.0, cmin=val, weight_bound=weight_bound(rho, c, m, w),
                   advantage=cost_matrix(c, m).c0 - val, status="ok")
    except SolverFailure as exc:
        row.update({k: float("nan") for k in SWEEP_COLUMNS[1:-1]}, status=f"solver-failure: {exc}".replace("\n", " "))
    return row


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def sweep_csv(rows: list, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in SWEEP_COLUMNS])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    out = []
    for r in csv.DictReader(lines):
        out.append({"index": int(r["index"]), "status": r["status"],
                    **{k: float(r[k]) for k in SWEEP_COLUMNS[1:-1]}})
    return out


def sweep_svg(rows: list, lam: float, c0: float) -> str:
    """Two scatter panels: cmin against 1 − W with the weight-bound line, and cmin against C_R/(d−1)."""
    ok = [r for r in rows if r["status"] == "ok"]
    w, h, pad = 360, 300, 45
    lo, hi = min([lam] + [r["cmin"] for r in ok]), max([c0] + [r["cmin"] for r in ok])
    span = hi - lo or 1.0
    xmax = max([1.0] + [r["CR_scaled"] for r in ok])

    def panel(ox, xs, title, xlabel, line=None, xhi=1.0):
        sx = lambda x: ox + pad + (w - 2 * pad) * x / xhi
        sy = lambda y: h - pad - (h - 2 * pad) * (y - lo) / span
        parts = [f'<rect x="{ox + pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" fill="none" stroke="black"/>',
                 f'<text x="{ox + w / 2}" y="{pad - 12}" text-anchor="middle" font-size="13">{title}</text>',
                 f'<text x="{ox + w / 2}" y="{h - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
                 f'<text x="{ox + 12}" y="{h / 2}" font-size="12" transform="rotate(-90 {ox + 12} {h / 2})">cmin</text>']
        for t in (lo, hi):
            parts.append(f'<text x="{ox + pad - 4}" y="{sy(t) + 4:.1f}" text-anchor="end" font-size="10">{t:.2f}</text>')
        for t in (0, xhi):
            parts.append(f'<text x="{sx(t):.1f}" y="{h - pad + 14}" text-anchor="middle" font-size="10">{t:.2f}</text>')
        if line:
            (x0, y0), (x1, y1) = line
            parts.append(f'<line x1="{sx(x0):.1f}" y1="{sy(y0):.1f}" x2="{sx(x1):.1f}" y2="{sy(y1):.1f}" stroke="red"/>')
        for x, r in zip(xs, ok):
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(r["cmin"]):.1f}" r="2" fill="steelblue"/>')
        return parts

    body = panel(0, [1 - r["W"] for r in ok], "cmin vs 1 - W", "1 - W", ((0, lam), (1, c0)))
    body += panel(w, [r["CR_scaled"] for r in ok], "cmin vs C_R/(d-1)", "C_R/(d-1)", xhi=xmax)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * w}" height="{h}">\n' + "\n".join(body) + "\n</svg>\n")


def cmd_sweep(cfg: RunConfig) -> int:
    tasks = [(cfg.ensemble, cfg.d, cfg.m, cfg.cost.to_json(), cfg.seed, i) for i in range(cfg.count)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(sweep_row, tasks))
    else:
        rows = [sweep_row(t) for t in tasks]
    tol = cfg.tol or 1e-6
    bad = 0
    for r in rows:
        if r["status"] != "ok":
            log.warning("row %d: %s", r["index"], r["status"])
        elif r["weight_bound"] > r["cmin"] + tol:
            bad += 1
            log.error("row %d violates the weight bound: %r > %r", r["index"], r["weight_bound"], r["cmin"])
    header = (f"phasecoh sweep {time.strftime('%Y-%m-%dT%H:%M:%S')} ensemble={cfg.ensemble} d={cfg.d} m={cfg.m} "
              f"count={cfg.count} seed={cfg.seed} cost={json.dumps(cfg.cost.to_json(), sort_keys=True)}")
    _emit(sweep_csv(rows, header), cfg.out)
    if cfg.svg:
        y = cost_matrix(cfg.cost, cfg.m)
        cfg.svg.write_text(sweep_svg(rows, y.lambda_min, y.c0))
    if bad:
        return EXIT_VERIFY
    if any(r["status"] != "ok" for r in rows):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg.only or None, cfg.tol, cfg.seed, report=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


COMMANDS = {"cost-matrix": cmd_cost_matrix, "cmin": cmd_cmin, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = make_config(ns)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, CostSpecError, SizeCapError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except SolverFailure as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
