"""Command-line front end.

Subcommands load system/surface configs, run the checks, write CSV
reports and finish with one machine-readable summary line::

    RESULT <command> <PASS|FAIL> max_residual=<r>

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 bad
configuration or arguments, 3 numerical failure (non-finite state,
singular metric, degenerate Omega).  All floats are printed with 17
significant digits so reruns with the same seed are byte-identical.
The NSL_THREADS environment variable caps the worker count used for
per-point residual evaluation (default 1, fully sequential).
"""

from __future__ import annotations

import argparse
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .connections import (
    connection_from_config,
    gauge_transform,
    random_gauge_tensor,
)
from .dynamics import ExtendedState, IntegratorConfig, integrate_family
from .errors import (
    ConfigError,
    DegenerateOmega,
    ExpressionSyntaxError,
    NonFiniteState,
    NuVanished,
    SingularMetric,
    ZeroWv,
)
from .expressions import (
    evaluate_jet,
    finite_difference_probe,
    parse,
    phase_variables,
    substitute,
)
from .normality import BatchReport, NormalityResidual, residual_at
from .sampling import PointSampler
from .surfaces import load_surface, simulate_shift, solve_nu, verify_orthogonality
from .systems import (
    EuclideanNewtonianSystem,
    PhasePoint,
    build_modified_hamiltonian,
    load_config,
    system_from_config,
)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fmt(x):
    return f"{x:.17g}"


def _result(command, passed, max_residual):
    print(f"RESULT {command} {'PASS' if passed else 'FAIL'} "
          f"max_residual={_fmt(max_residual)}")
    return EXIT_PASS if passed else EXIT_CHECK_FAILED


def _worker_count():
    try:
        return max(1, int(os.environ.get("NSL_THREADS", "1")))
    except ValueError:
        return 1


def _default_y0(surf):
    # normalize nu at the patch center; corners sit farthest from it and
    # are the likeliest places for the initial-speed field to degenerate
    return [(lo + hi) / 2.0 for lo, hi in surf.domain]


def _load_system_conn(path):
    cfg = load_config(path)
    sys = system_from_config(cfg)
    return sys, connection_from_config(cfg, sys)


def _sampler(sys, args):
    return PointSampler(n=sys.n, count=args.points, seed=args.seed,
                        pmin=args.pmin, pmax=args.pmax, xbox=args.xbox)


def _outdir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parallel_rows(points, fn):
    workers = _worker_count()
    if workers == 1:
        return [fn(q) for q in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


def cmd_check_normality(args):
    sys, conn = _load_system_conn(args.system)
    sampler = _sampler(sys, args)
    points = sampler.points()

    def row(q):
        try:
            return residual_at(sys, conn, q)
        except Exception as err:  # noqa: BLE001
            empty = np.zeros((0, 0))
            return NormalityResidual(q=q, weak1=np.zeros(0), weak2=np.zeros(0),
                                     addA=empty, addB=empty, addC=empty,
                                     error=f"{type(err).__name__}: {err}")

    rows = _parallel_rows(points, row)
    report = BatchReport(rows=rows, tolerance=args.tol, n=sys.n,
                         additional_applicable=sys.n >= 3)
    out = _outdir(args)
    report.write_csv(out / "residuals.csv")
    extra = "" if report.additional_applicable else " (additional equations n/a for n=2)"
    print(f"checked {len(rows)} points, median {_fmt(report.median_abs)}, "
          f"violations {len(report.violations)}{extra}")
    print(f"wrote {out / 'residuals.csv'}")
    return _result("check-normality", report.verdict == "PASS", report.max_abs)


def cmd_solve_nu(args):
    sys, conn = _load_system_conn(args.system)
    surf = load_surface(args.surface)
    grid = args.grid or getattr(surf, "default_grid", None) or [9] * surf.m
    y0 = _default_y0(surf) if args.y0 is None else args.y0
    result = solve_nu(sys, conn, surf, y0, args.nu0, grid)
    out = _outdir(args)
    path = out / "nu_grid.csv"
    with open(path, "w") as fh:
        fh.write(",".join([f"y{i+1}" for i in range(surf.m)] + ["nu"]) + "\n")
        for _, y, value in result.nodes():
            fh.write(",".join(_fmt(v) for v in (*y, value)) + "\n")
    print(f"solved nu on grid {grid}, base value {_fmt(args.nu0)}")
    print(f"wrote {path}")
    return _result("solve-nu", result.residual <= args.tol, result.residual)


def cmd_simulate_shift(args):
    sys, conn = _load_system_conn(args.system)
    surf = load_surface(args.surface)
    grid = args.grid or getattr(surf, "default_grid", None) or [9] * surf.m
    cfg = IntegratorConfig(t_end=args.t_end, step=args.step)
    if args.solve_nu:
        y0 = _default_y0(surf) if args.y0 is None else args.y0
        nu_grid = solve_nu(sys, conn, surf, y0, args.nu0, grid)
        run = simulate_shift(sys, conn, surf, nu_grid, cfg)
    else:
        run = simulate_shift(sys, conn, surf, args.nu0, cfg, grid=grid)
    report = verify_orthogonality(run, args.tol)
    out = _outdir(args)
    run.write_csv(out / "shift.csv")
    if report.verdict == "NORMAL":
        print(f"orthogonality kept over t in [0, {_fmt(args.t_end)}]")
    else:
        print(f"orthogonality violated at t={_fmt(report.first_violation)}")
    print(f"wrote {out / 'shift.csv'}")
    return _result("simulate-shift", report.verdict == "NORMAL", report.max_abs)


def cmd_gauge_test(args):
    sys, conn = _load_system_conn(args.system)
    rng = np.random.default_rng(args.seed)
    sampler = PointSampler(n=sys.n, count=3, seed=args.seed + 1,
                           pmin=args.pmin, pmax=args.pmax, xbox=args.xbox)
    points = sampler.points()
    base = [residual_at(sys, conn, q) for q in points]
    base_alpha = []
    from .engine import PointCalculus

    for q in points:
        base_alpha.append(PointCalculus(sys, conn, q).alpha)
    worst_alpha = 0.0
    worst_resid = 0.0
    rows = []
    for k in range(args.count):
        T = random_gauge_tensor(sys.n, rng)
        gauged, _ = gauge_transform(sys, conn, T)
        for q, b, a0 in zip(points, base, base_alpha):
            calc = PointCalculus(sys, gauged, q)
            d_alpha = float(np.max(np.abs(calc.alpha - a0)))
            r = residual_at(sys, gauged, q)
            d_resid = abs(r.max_abs - b.max_abs)
            for attr in ("weak1", "weak2", "addA", "addB", "addC"):
                lhs, rhs = getattr(r, attr), getattr(b, attr)
                if lhs.size:
                    d_resid = max(d_resid, float(np.max(np.abs(lhs - rhs))))
            worst_alpha = max(worst_alpha, d_alpha)
            worst_resid = max(worst_resid, d_resid)
            rows.append((k, d_alpha, d_resid))
    out = _outdir(args)
    path = out / "gauge.csv"
    with open(path, "w") as fh:
        fh.write("gauge_index,alpha_change,residual_change\n")
        for k, da, dr in rows:
            fh.write(f"{k},{_fmt(da)},{_fmt(dr)}\n")
    print(f"{args.count} random gauges: max alpha change {_fmt(worst_alpha)}, "
          f"max residual change {_fmt(worst_resid)}")
    print(f"wrote {path}")
    passed = worst_alpha <= 1e-8 and worst_resid <= 1e-7
    return _result("gauge-test", passed, max(worst_alpha, worst_resid))


def _connection_oracle_residual(sys, q):
    """Canonical coefficients versus the velocity-space second derivative."""
    from .connections import CanonicalConnection
    from .oracles import canonical_connection_oracle

    conn = CanonicalConnection(sys)
    direct = conn.gamma(q)
    oracle = canonical_connection_oracle(sys, q)
    return float(np.max(np.abs(direct - oracle)))


def cmd_cross_check(args):
    sys, _ = _load_system_conn(args.system)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    rows = []

    sampler = PointSampler(n=sys.n, count=20, seed=args.seed,
                           pmin=args.pmin, pmax=args.pmax, xbox=args.xbox)
    skipped = 0
    for q in sampler.points():
        try:
            r = _connection_oracle_residual(sys, q)
        except (ZeroWv, SingularMetric, DegenerateOmega):
            skipped += 1
            continue
        rows.append(("connection_oracle", r))
        worst = max(worst, r)
    if skipped:
        print(f"skipped {skipped} oracle points outside the system's domain")

    # jet evaluator against central differences on the system's own fields
    pv = phase_variables(sys.n)
    probes = [parse("p1^2 + x1*p2", pv), parse("sqrt(p1^2 + p2^2)", pv)]
    for expr in probes:
        q = PhasePoint(rng.uniform(-1, 1, sys.n), rng.uniform(0.5, 1.5, sys.n))
        jet = evaluate_jet(expr, q, 2)
        for slot in range(2 * sys.n):
            mi = [0] * (2 * sys.n)
            mi[slot] = 1
            fd = finite_difference_probe(expr, q, mi, 1e-5)
            r = abs(jet.partial(tuple(mi)) - fd)
            rows.append(("jet_vs_fd", r))
            worst = max(worst, r / max(1.0, abs(jet.partial(tuple(mi)))))

    # flat-family (h = 0) versus rescaled-Hamiltonian trajectories: the two
    # flows agree pointwise in time once the momentum fibers are inverted
    if isinstance(sys, EuclideanNewtonianSystem):
        from .connections import ZeroConnection

        flat = EuclideanNewtonianSystem(sys.W, "0", sys.n)
        inv = parse("1/sqrt(" + "+".join(f"p{i+1}^2" for i in range(sys.n)) + ")",
                    phase_variables(sys.n))
        twin = build_modified_hamiltonian(substitute(sys.W, "v", inv), sys.n)
        zc = ZeroConnection(sys.n)
        cfg = IntegratorConfig(t_end=1.0, step=args.step)
        states_a, states_b = [], []
        for _ in range(5):
            x0 = rng.uniform(-0.3, 0.3, sys.n)
            p0 = rng.normal(size=sys.n)
            p0 *= rng.uniform(0.6, 1.2) / np.linalg.norm(p0)
            states_a.append(ExtendedState(0, PhasePoint(x0, p0)))
            states_b.append(ExtendedState(0, PhasePoint(x0, p0 / float(p0 @ p0))))
        for tr, tr2 in zip(integrate_family(flat, zc, states_a, cfg),
                           integrate_family(twin, zc, states_b, cfg)):
            r = float(np.max(np.abs(tr.x - tr2.x)))
            rows.append(("trajectory_equivalence", r))
            worst = max(worst, r)

    out = _outdir(args)
    path = out / "crosscheck.csv"
    with open(path, "w") as fh:
        fh.write("check,residual\n")
        for name, r in rows:
            fh.write(f"{name},{_fmt(r)}\n")
    print(f"ran {len(rows)} cross checks")
    print(f"wrote {path}")
    return _result("cross-check", worst <= args.tol, worst)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nslab",
        description="normal-shift laboratory for momentum-space Newtonian systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, surface=False):
        p.add_argument("--system", required=True, help="system config JSON")
        if surface:
            p.add_argument("--surface", required=True, help="surface config JSON")
        p.add_argument("--points", type=int, default=100)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--tol", type=float, default=1e-7)
        p.add_argument("--step", type=float, default=1e-3)
        p.add_argument("--t-end", type=float, default=1.0)
        p.add_argument("--nu0", type=float, default=1.0)
        p.add_argument("--grid", type=lambda s: [int(v) for v in s.split(",")],
                       default=None)
        p.add_argument("--y0", type=lambda s: [float(v) for v in s.split(",")],
                       default=None)
        p.add_argument("--pmin", type=float, default=0.1)
        p.add_argument("--pmax", type=float, default=10.0)
        p.add_argument("--xbox", type=float, default=1.0)
        p.add_argument("--out-dir", default="out")

    p = sub.add_parser("check-normality", help="residual sweep over a point cloud")
    common(p)
    p.set_defaults(fn=cmd_check_normality)

    p = sub.add_parser("solve-nu", help="integrate the Pfaff system over a grid")
    common(p, surface=True)
    p.set_defaults(fn=cmd_solve_nu)

    p = sub.add_parser("simulate-shift",
                       help="shift a surface patch and verify orthogonality")
    common(p, surface=True)
    p.add_argument("--solve-nu", action="store_true",
                   help="solve for nu instead of using the constant --nu0")
    p.set_defaults(fn=cmd_simulate_shift)

    p = sub.add_parser("gauge-test", help="random gauge invariance suite")
    common(p)
    p.add_argument("--count", type=int, default=50)
    p.set_defaults(fn=cmd_gauge_test)

    p = sub.add_parser("cross-check", help="internal oracles and equivalences")
    common(p)
    p.set_defaults(fn=cmd_cross_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, ExpressionSyntaxError, ValueError) as err:
        print(f"configuration error: {err}")
        return EXIT_CONFIG
    except (NonFiniteState, SingularMetric, DegenerateOmega, NuVanished, ZeroWv) as err:
        print(f"numerical failure: {type(err).__name__}: {err}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
