"""Command-line front end.

Subcommands: digits, matrix, render, roots, verify, simulate.  Exit codes:
0 success, 1 check failure, 2 usage or parse error.  All output is
deterministic given flags and seed; floats print with 17 significant digits.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys
from dataclasses import dataclass

import numpy as np

from . import julia, machine, spectrum
from .julia import DEFAULT_DEPTH, DEFAULT_WINDOW, FiberedSystem
from .numeration import (
    SpecError,
    base_product,
    counter,
    from_digits,
    parse_base_spec,
    parse_probs_spec,
    successor,
    to_digits,
)

# Named configurations for the rendered set gallery: base spec, probs spec.
PRESETS = {
    "fig3a": ("const:3", "plist:0.7;tail=1"),
    "fig3b": ("const:3", "plist:0.5;tail=1"),
    "fig3c": ("const:3", "plist:0.4;tail=1"),
    "fig4a": ("const:3", "plist:0.8,0.8,0.8;tail=1"),
    "fig4b": ("const:3", "plist:0.7,0.7,0.7;tail=1"),
    "fig4c": ("const:3", "plist:0.6,0.6,0.6;tail=1"),
    "fig5a": ("even", "plist:0.55,1,0.5;tail=0.55"),
    "fig5b": ("even", "plist:0.55,1;tail=0.55"),
    "fig5c": ("even", "plist:1;tail=0.55"),
    "fig6a": ("even", "pconst:0.8"),
    "fig6b": ("even", "pconst:0.6"),
    "fig6c": ("even", "pconst:0.52"),
    "fig7a": ("fib", "plist:0.55,1,0.5;tail=0.55"),
    "fig7b": ("fib", "plist:0.55,1;tail=0.55"),
    "fig7c": ("fib", "plist:1;tail=0.55"),
    "fig8a": ("fib", "pconst:0.55"),
    "fig8b": ("fib", "pconst:0.81"),
    "fig8c": ("fib", "pconst:0.61"),
    "fig9a": ("periodic:3,5", "plist:0.55,0.9;tail=0.55"),
    "fig9b": ("periodic:3,5", "plist:0.695,1;tail=0.695"),
    "fig9c": ("periodic:3,5", "plist:0.55,0.95,0.95,0.95;tail=0.55"),
    "fig10a": ("periodic:3,5", "pconst:0.7"),
    "fig10b": ("periodic:3,5", "pconst:0.704"),
    "fig10c": ("periodic:3,5", "pconst:0.8"),
}

VERIFY_DEFAULT_PRESETS = ("fig3a", "fig4a", "fig6a", "fig8a", "fig10a")
VERIFY_SUITES = ("stochasticity", "renorm", "eigenpairs", "escape", "witness",
                 "factorization", "transient", "all")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration; spec strings are kept in canonical form."""

    base_spec: str
    probs_spec: str
    seed: int = 0
    threads: int = 1
    out: str | None = None

    def system(self) -> FiberedSystem:
        return FiberedSystem(parse_base_spec(self.base_spec),
                             parse_probs_spec(self.probs_spec))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _resolve_config(args) -> tuple[str, str]:
    preset = getattr(args, "preset", None)
    if preset:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}")
        return PRESETS[preset]
    if args.base is None or args.probs is None:
        raise UsageError("need --base and --probs (or --preset)")
    return args.base, args.probs


def _run_config(args) -> RunConfig:
    base_spec, probs_spec = _resolve_config(args)
    return RunConfig(base_spec, probs_spec, seed=args.seed,
                     threads=args.threads, out=args.out)


def _system(args) -> tuple[FiberedSystem, str, str]:
    cfg = _run_config(args)
    return cfg.system(), cfg.base_spec, cfg.probs_spec


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_digits(args) -> int:
    base = parse_base_spec(args.base)
    dv = to_digits(args.n, base)
    succ = from_digits(successor(dv))
    digits = ",".join(str(a) for a in dv.digits)
    print(f"digits={digits} counter={counter(dv)} succ={succ}")
    return 0


def cmd_matrix(args) -> int:
    sysm, base_spec, probs_spec = _system(args)
    mat = machine.build_matrix(args.n, sysm.base, sysm.probs)
    if args.out:
        machine.write_matrix_coordinate(mat, args.out)
    mask = mat.unclipped_mask()
    row_dev = max((abs(row.total() - 1.0) for row in mat.rows if mask[row.source]),
                  default=0.0)
    col_dev = max((abs(total - 1.0) for _, total, complete in
                   machine.column_sum_report(mat) if complete), default=0.0)
    ok = row_dev <= 1e-12 and col_dev <= 1e-12
    print(f"states={mat.dim} clipped={len(mat.clipped_rows)}")
    print(f"row_sum_max_dev={_fmt(row_dev)}")
    print(f"complete_column_max_dev={_fmt(col_dev)}")
    print(f"result={'pass' if ok else 'fail'}")
    return 0 if ok else 1


def _parse_window(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError("window must be re_min,re_max,im_min,im_max")
    try:
        win = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad window {text!r}") from exc
    if not (win[1] > win[0] and win[3] > win[2]):
        raise UsageError("window has zero area")
    return win


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        res = (int(w), int(h))
    except ValueError as exc:
        raise UsageError(f"bad resolution {text!r} (expected WxH)") from exc
    if res[0] < 1 or res[1] < 1:
        raise UsageError("resolution must be positive")
    return res


def cmd_render(args) -> int:
    sysm, base_spec, probs_spec = _system(args)
    window = _parse_window(args.window)
    resolution = _parse_resolution(args.res)
    grid = julia.render(sysm, window, resolution, args.depth, threads=args.threads)
    prefix = args.out
    julia.write_pgm(grid, prefix + ".pgm")
    julia.write_pbm(grid, prefix + ".pbm")
    julia.write_metadata(grid, prefix + ".meta", base_spec, probs_spec)
    bounded = int((~grid.escaped).sum())
    print(f"bounded_pixels={bounded} escaped_pixels={grid.escaped.size - bounded}")
    return 0


def cmd_roots(args) -> int:
    sysm, _, _ = _system(args)
    ps = spectrum.point_spectrum(sysm, args.depth, cap=args.cap)
    if args.out:
        spectrum.write_roots_csv(ps, args.out)
    total = sum(len(level.roots) for level in ps.levels)
    print(f"levels={len(ps.levels)} roots={total} capped={str(ps.capped).lower()}")
    return 0


def cmd_simulate(args) -> int:
    sysm, _, _ = _system(args)
    traj = machine.simulate(sysm.base, sysm.probs, args.start, args.steps, args.seed)
    if args.out:
        machine.write_trajectory_csv(traj, args.out)
    else:
        _sys.stdout.write("step,state\n")
        for step, state in enumerate(traj.states):
            _sys.stdout.write(f"{step},{state}\n")
    return 0


# ---------------------------------------------------------------------------
# Verify suites
# ---------------------------------------------------------------------------


def _capped_level(base, hi: int) -> int:
    n = 2
    for r in range(1, 64):
        try:
            q = base_product(base, r)
        except OverflowError:
            break
        if q > hi:
            break
        n = q
    return max(n, 2)


def _suite_stochasticity(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    n = _capped_level(sysm.base, 2500)
    mat = machine.build_matrix(n, sysm.base, sysm.probs)
    mask = mat.unclipped_mask()
    row_dev = max((abs(row.total() - 1.0) for row in mat.rows if mask[row.source]),
                  default=0.0)
    col_dev = max((abs(total - 1.0) for _, total, complete in
                   machine.column_sum_report(mat) if complete), default=0.0)
    ok = row_dev <= 1e-12 and col_dev <= 1e-12
    return ok, f"n={n} row_dev={row_dev:.17g} col_dev={col_dev:.17g}"


def _suite_renorm(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    n2 = 4 * sysm.d(2)
    rep = machine.renorm_check(1, n2, sysm.base, sysm.probs)
    ok = rep.max_diff() <= 1e-12
    return ok, f"n2={n2} max_diff={rep.max_diff():.17g}"


def _suite_eigenpairs(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    ps = spectrum.point_spectrum(sysm, 2, cap=4000)
    n = _capped_level(sysm.base, 1024)
    rep = spectrum.verify_eigenpairs(sysm, ps.all_roots(), n, tol=1e-9)
    return rep.ok, f"n={n} roots={len(ps.all_roots())} max_resid={rep.max_residual:.17g}"


def _suite_escape(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    mismatches = 0
    count = 2000
    for _ in range(count):
        lam = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        tight = julia.orbit(sysm, lam, 200).escaped
        v = lam
        loose = False
        for r in range(1, 201):
            v = julia.stage_map(sysm, r, v)
            if abs(v) > 1e6:
                loose = True
                break
        mismatches += tight != loose
    return mismatches == 0, f"samples={count} mismatches={mismatches}"


def _suite_witness(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    n = _capped_level(sysm.base, 1024)
    mat = machine.build_matrix(n, sysm.base, sysm.probs)
    csr = mat.to_csr()
    mask = mat.unclipped_mask()
    lams = spectrum.sample_bounded(sysm, 10, depth=200, seed=seed)
    worst_slack = -1e30
    for lam in lams:
        for t in range(1, 5):
            g = julia.witness(sysm, lam, t, n)
            resid = float(np.abs((csr @ g - lam * g)[mask]).max())
            bound = 3.0 * sysm.probs.prefix_product(t) + 1e-12
            worst_slack = max(worst_slack, resid - bound)
    return worst_slack <= 0.0, f"n={n} worst_over_bound={worst_slack:.17g}"


def _suite_factorization(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    kept = 0
    while kept < 100:
        lam = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        if abs(lam) > 1:
            continue
        r = int(rng.integers(2, 13))
        if julia.orbit(sysm, lam, r).escaped:
            continue
        k = int(rng.integers(1, r))
        worst = max(worst, julia.factorization_check(sysm, lam, r, k))
        kept += 1
    return worst < 1e-9, f"cases={kept} worst_resid={worst:.17g}"


def _suite_transient(sysm: FiberedSystem, seed: int) -> tuple[bool, str]:
    if sysm.probs.infinite_product() <= 0.0:
        return True, "skipped (vanishing probability product)"
    grid = julia.render(sysm, DEFAULT_WINDOW, (192, 192), 200)
    rep = spectrum.transient_limit_check(sysm, grid, sample_count=12, r_probe=60,
                                         seed=seed)
    return rep.ok, (f"interior_max={rep.interior_max_mod:.17g} "
                    f"boundary_min={rep.boundary_min_mod:.17g} "
                    f"boundary_max={rep.boundary_max_mod:.17g}")


_SUITE_FUNCS = {
    "stochasticity": _suite_stochasticity,
    "renorm": _suite_renorm,
    "eigenpairs": _suite_eigenpairs,
    "escape": _suite_escape,
    "witness": _suite_witness,
    "factorization": _suite_factorization,
    "transient": _suite_transient,
}


def cmd_verify(args) -> int:
    suites = list(_SUITE_FUNCS) if args.suite == "all" else [args.suite]
    configs: list[tuple[str, str, str]] = []
    if args.preset or (args.base and args.probs):
        base_spec, probs_spec = _resolve_config(args)
        configs.append((args.preset or "custom", base_spec, probs_spec))
    else:
        for name in VERIFY_DEFAULT_PRESETS:
            base_spec, probs_spec = PRESETS[name]
            configs.append((name, base_spec, probs_spec))
    failures = 0
    report_lines = []
    for name, base_spec, probs_spec in configs:
        sysm = FiberedSystem(parse_base_spec(base_spec), parse_probs_spec(probs_spec))
        for suite in suites:
            try:
                ok, detail = _SUITE_FUNCS[suite](sysm, args.seed)
            except (ValueError, OverflowError) as exc:
                ok, detail = False, f"error={exc}"
            failures += not ok
            print(f"{'PASS' if ok else 'FAIL'} {suite} {name} {detail}")
            report_lines.append(f"{suite}.{name}.result={'pass' if ok else 'fail'}")
            for tok in detail.split():
                if "=" in tok:
                    report_lines.append(f"{suite}.{name}.{tok}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(report_lines) + "\n")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochadd",
        description="Stochastic adding machines over mixed-radix bases: "
                    "matrices, escape-time sets, spectra.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--base", help="base spec, e.g. const:3, periodic:3,5, "
                                       "list:2,3,4;tail=4, even, fib")
    common.add_argument("--probs", help="probability spec, e.g. pconst:0.7, "
                                        "plist:0.7,1;tail=0.55, pgeo:c=0.25,gamma=0.5")
    common.add_argument("--preset", help="named configuration (fig3a..fig10c)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", help="output path (or prefix for render)")

    p = sub.add_parser("digits", parents=[common], help="digit expansion of an integer")
    p.add_argument("n", type=int)
    p.set_defaults(func=cmd_digits)

    p = sub.add_parser("matrix", parents=[common], help="truncated transition matrix")
    p.add_argument("--n", type=int, required=True, help="number of states")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("render", parents=[common], help="escape-time membership grid")
    p.add_argument("--window", default=",".join(str(x) for x in DEFAULT_WINDOW))
    p.add_argument("--res", default="512x512")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("roots", parents=[common], help="point-spectrum roots CSV")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--cap", type=int, default=spectrum.ROOT_CAP)
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--suite", required=True, choices=VERIFY_SUITES)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common], help="sample a trajectory")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "render" and not args.out:
        parser.error("render requires --out")
    if args.command == "digits" and not args.base:
        parser.error("digits requires --base")
    try:
        return args.func(args)
    except (SpecError, UsageError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
