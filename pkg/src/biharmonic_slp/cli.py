"""Command-line front end.

Subcommands: robin, scales, solve, converge, kernel-check.  Options may also
come from a ``key=value`` config file (``--config``); command-line flags win.

Exit codes: 0 success, 2 invalid input or geometry, 3 non-convergence or a
failed self-check, 4 singular or degenerate system.  Every failure prints a
single line ``error code=<c> kind=<k> message="<text>"`` on stderr, plus
``nearest_rho=<r>`` when a degenerate scale was located.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .assembly import (
    NEAR_SPACINGS,
    TracePair,
    affine_trace_columns,
    assemble_V,
    boundary_distance,
    bordered_rcond,
    build_bordered,
    eval_field,
    solve_trace,
    solve_V,
)
from .errors import (
    BiharmonicError,
    ConvergenceError,
    DegenerateScaleError,
    GeometryError,
    LinearAlgebraError,
    NearBoundaryError,
    SingularEvaluationError,
)
from .geometry import MultiCurve, multicurve_from_spec
from .kernels import (
    G0,
    G_vector,
    KernelParams,
    circle_closed_forms,
    grad_G_vector,
    omega_vector,
    split_trace_kernels,
    trace_kernels,
)
from .robin import ExteriorProblem, check_criteria, default_probe_radius
from .scales import find_degenerate_scales, locate_sigma_dips, sigma_min_scan

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_SINGULAR = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:count`` -> linspace(lo, hi, count); bounds must be positive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be lo:hi:count, got {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if not (0 < lo < hi) or count < 2:
        raise ValueError(f"grid needs 0 < lo < hi and count >= 2, got {text!r}")
    return np.linspace(lo, hi, count)


def parse_points(text: str) -> np.ndarray:
    """``x0:x1:nx,y0:y1:ny`` -> tensor grid, rows sorted by (x1, x2)."""
    try:
        xs, ys = text.split(",")
        (x0, x1, nx), (y0, y1, ny) = xs.split(":"), ys.split(":")
        gx = np.linspace(float(x0), float(x1), int(nx))
        gy = np.linspace(float(y0), float(y1), int(ny))
    except ValueError as exc:
        raise ValueError(f"points must be x0:x1:nx,y0:y1:ny, got {text!r}") from exc
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def boundary_data(spec: str, params: KernelParams):
    """Boundary data source: ``affine:a0,a1,a2`` or ``source:z1,z2``.

    ``affine`` is the trace of a0 + a1 x1 + a2 x2; ``source`` is the trace
    of the point source G0(. - z).  Returns (data, exact field).
    """
    kind, _, args = spec.strip().lower().partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise ValueError(f"bad data spec {spec!r}") from exc
    if kind == "affine" and len(vals) == 3:
        a = np.array(vals)

        def data(x, n):
            return a[0] + x @ a[1:], n @ a[1:]

        def exact(x):
            return a[0] + x @ a[1:]

        return data, exact
    if kind == "source" and len(vals) == 2:
        z = np.array(vals)

        def data(x, n):
            g = grad_G_vector(x - z, params)[:, 0, :]
            return G0(x - z, params), np.sum(g * n, axis=1)

        def exact(x):
            return G0(x - z, params)

        return data, exact
    raise ValueError(f"data must be affine:a0,a1,a2 or source:z1,z2, got {spec!r}")


# option name -> (converter, default); None defaults are filled per command
OPTIONS = {
    "curve": (str, "circle:r=1"),
    "kappa0": (float, 1.0),
    "kappa1": (float, 0.0),
    "n": (int, 256),
    "probe": (float, None),
    "grid": (str, None),
    "tol": (float, 1e-6),
    "out": (str, None),
    "sigma_min": (_bool, False),
    "sigma_n": (int, 128),
    "workers": (int, 1),
    "asym_tol": (float, 1e-7),
    "max_n": (int, 1024),
    "n_min": (int, 32),
    "n_max": (int, 512),
    "conv_tol": (float, 1e-6),
    "data": (str, "affine:0,1,0"),
    "mode": (str, "trace"),
    "points": (str, None),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(EXIT_INPUT, "usage", message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--curve", help="curve spec, e.g. circle:r=1+circle:r=0.3,cx=0.2")
    g.add_argument("--kappa0", type=float)
    g.add_argument("--kappa1", type=float)
    g.add_argument("--n", type=int, help="nodes per curve (even, >= 8)")
    g.add_argument("--probe", type=float, help="probe circle radius")
    g.add_argument("--grid", help="scale grid lo:hi:count")
    g.add_argument("--tol", type=float, help="singularity tolerance")
    g.add_argument("--out", help="output directory (stdout if omitted)")
    g.add_argument("--sigma-min", dest="sigma_min", action="store_const", const=True)
    g.add_argument("--sigma-n", dest="sigma_n", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--asym-tol", dest="asym_tol", type=float, help="relative asymmetry limit")
    g.add_argument("--max-n", dest="max_n", type=int)
    g.add_argument("--n-min", dest="n_min", type=int)
    g.add_argument("--n-max", dest="n_max", type=int)
    g.add_argument("--conv-tol", dest="conv_tol", type=float)
    g.add_argument("--data", help="affine:a0,a1,a2 | source:z1,z2")
    g.add_argument("--mode", help="trace | single-layer")
    g.add_argument("--points", help="evaluation grid x0:x1:nx,y0:y1:ny")
    g.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="biharmonic-slp", description="Biharmonic single-layer toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("robin", parents=[common], help="Robin matrix report")
    sub.add_parser("scales", parents=[common], help="degenerate-scale scan")
    sub.add_parser("solve", parents=[common], help="boundary solve and field output")
    sub.add_parser("converge", parents=[common], help="Robin matrix convergence in N")
    sub.add_parser("kernel-check", parents=[common], help="kernel self-checks")
    return p


def resolve_config(args: argparse.Namespace) -> argparse.Namespace:
    """Merge config-file values under command-line flags, then defaults."""
    file_vals = bio.read_config(args.config) if args.config else {}
    unknown = set(file_vals) - set(OPTIONS)
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    for key, (conv, default) in OPTIONS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, conv(file_vals[key]) if key in file_vals else default)
    if args.n < 8 or args.n % 2:
        raise ValueError(f"n must be even and >= 8, got {args.n}")
    if args.mode not in ("trace", "single-layer"):
        raise ValueError(f"mode must be trace or single-layer, got {args.mode!r}")
    return args


def _setup(args) -> tuple[MultiCurve, KernelParams]:
    params = KernelParams(args.kappa0, args.kappa1)
    multi = multicurve_from_spec(args.curve)
    return multi, params


def _outpath(args, name):
    return None if args.out is None else Path(args.out) / name


# -- subcommands -------------------------------------------------------------


def cmd_robin(args) -> int:
    multi, params = _setup(args)
    n = args.n
    while True:
        ext = ExteriorProblem(multi, params, n, args.probe)
        lam = ext.robin_matrix(args.tol)
        if lam.relative_asymmetry <= args.asym_tol or 2 * n > args.max_n:
            break
        logger.info("asymmetry %.3g at N=%d; doubling", lam.relative_asymmetry, n)
        n *= 2
    if lam.relative_asymmetry > args.asym_tol:
        raise ConvergenceError(
            f"relative asymmetry {lam.relative_asymmetry:.3e} above {args.asym_tol:g} at N={n}"
        )
    crit = check_criteria(multi, params)
    record = {
        "curve": args.curve,
        "kappa0": params.kappa0,
        "kappa1": params.kappa1,
        "exterior_curves": " ".join(str(i) for i in multi.exterior_indices()),
        "hole_curves": " ".join(str(i) for i, e in enumerate(multi.exterior) if not e) or "none",
        "r_minus": multi.r_minus,
        "r_plus": multi.r_plus,
        **lam.as_dict(),
        "criteria_prediction": crit.prediction,
        "bordered_rcond": bordered_rcond(ext.system),
    }
    bio.write_report(_outpath(args, "robin.txt"), record)
    if args.out is not None:
        bio.export_matrix(_outpath(args, "robin_matrix.csv"), lam.matrix)
    return EXIT_OK


def cmd_scales(args) -> int:
    multi, params = _setup(args)
    grid = parse_grid(args.grid) if args.grid else None
    res = find_degenerate_scales(multi, params, args.n, tol=args.tol, workers=args.workers, rho_grid=grid)
    sigma, dips = None, None
    if args.sigma_min:
        sigma = sigma_min_scan(multi, params, res.rho, n=args.sigma_n, workers=args.workers)[:, 1]
        lo, hi = res.interval
        dense = sigma_min_scan(multi, params, np.linspace(lo, hi, max(96, len(res.rho))), args.sigma_n, args.workers)
        dips = locate_sigma_dips(multi, params, dense, n=args.sigma_n)
    if args.out is not None:
        bio.export_scan(_outpath(args, "branches.csv"), res, sigma)
    bio.export_roots(_outpath(args, "roots.csv"), res.roots, dips)
    return EXIT_OK


def _nearest_degenerate_scale(multi, params, n) -> float:
    res = find_degenerate_scales(multi, params, min(n, 256))
    if not res.roots:
        return float("nan")
    return min((r.rho for r in res.roots), key=lambda r: abs(math.log(r)))


def cmd_solve(args) -> int:
    multi, params = _setup(args)
    data, _ = boundary_data(args.data, params)
    V = assemble_V(multi, params, args.n)
    disc = V.disc
    p = TracePair(*data(disc.points, disc.normals))
    try:
        if args.mode == "single-layer":
            lam = ExteriorProblem(multi, params, args.n, args.probe).robin_matrix(args.tol)
            if lam.definiteness == "singular":
                raise DegenerateScaleError(f"Robin matrix singular, eigenvalues {lam.eigenvalues}")
            q = solve_V(V, p)
        else:
            q = solve_trace(build_bordered(V), p)
    except DegenerateScaleError as exc:
        raise CLIError(
            EXIT_SINGULAR, "degenerate", str(exc), nearest_rho=_nearest_degenerate_scale(multi, params, args.n)
        ) from exc
    resid = V.matrix @ q.vector + affine_trace_columns(disc) @ q.a - p.vector
    if args.points:
        pts = parse_points(args.points)
    else:
        R = 1.5 * multi.r_plus
        pts = parse_points(f"{-R}:{R}:13,{-R}:{R}:13")
    near = boundary_distance(disc, pts) < NEAR_SPACINGS
    keep = pts[~near]
    fv = eval_field(q, keep) if len(keep) else None
    rows = [] if fv is None else np.column_stack([keep, fv.u, fv.lap]).tolist()
    bio.write_csv(_outpath(args, "field.csv"), ["x1", "x2", "u", "lap_u"], rows)
    record = {
        "mode": args.mode,
        "data": args.data,
        "n": args.n,
        "points": len(pts),
        "evaluated": len(keep),
        "warnings": f"near_boundary_skipped:{int(near.sum())}",
        "trace_residual": float(np.max(np.abs(resid))),
        "a": q.a,
    }
    if args.out is not None:
        bio.write_report(_outpath(args, "solve.txt"), record)
        bio.export_density(_outpath(args, "density.csv"), q)
    if near.any():
        print(f"warning near_boundary_skipped={int(near.sum())}", file=sys.stderr)
    return EXIT_OK


def _closed_form_robin(multi: MultiCurve, params: KernelParams):
    ext = multi.exterior_part()
    if len(ext.curves) != 1 or ext.curves[0].kind != "circle":
        return None
    c = ext.curves[0]
    if np.hypot(*c.center) > 1e-12 * c.shape[0]:
        return None
    return np.diag(circle_closed_forms(c.shape[0], params).lam)


def cmd_converge(args) -> int:
    multi, params = _setup(args)
    ns = []
    n = args.n_min
    while n <= args.n_max:
        ns.append(n)
        n *= 2
    if len(ns) < 2:
        raise ValueError("need at least two node counts between n_min and n_max")
    probe = args.probe or default_probe_radius(multi, params)
    mats = [ExteriorProblem(multi, params, n, probe).robin_matrix(args.tol) for n in ns]
    ref = mats[-1].matrix
    closed = _closed_form_robin(multi, params)
    rows = []
    for n, lam in zip(ns, mats):
        err_ref = float(np.max(np.abs(lam.matrix - ref)))
        err_closed = float(np.max(np.abs(lam.matrix - closed))) if closed is not None else float("nan")
        rows.append([n, err_ref, err_closed, lam.relative_asymmetry])
    bio.write_csv(_outpath(args, "converge.csv"), ["n", "err_ref", "err_closed", "asymmetry"], rows)
    if mats[-1].relative_asymmetry > args.asym_tol:
        raise ConvergenceError(f"relative asymmetry {mats[-1].relative_asymmetry:.3e} at N={ns[-1]}")
    if rows[-2][1] > args.conv_tol * max(1.0, float(np.abs(ref).max())):
        raise ConvergenceError(f"N={ns[-2]} differs from N={ns[-1]} by {rows[-2][1]:.3e}")
    return EXIT_OK


def kernel_checks(params: KernelParams, seed: int = 0) -> list[tuple[str, float, float]]:
    """(name, measured error, tolerance) for the built-in kernel self-checks."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.3, 3.0, 100)
    th = rng.uniform(0, 2 * np.pi, 100)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    out = []

    h = 1e-5 * r[:, None]
    e = np.eye(2)
    fd = np.column_stack(
        [(G0(x + h * e[i], params) - G0(x - h * e[i], params)) / (2 * h[:, 0]) for i in range(2)]
    )
    G = G_vector(x, params)
    err = np.max(np.abs(fd + G[:, 1:]) / np.maximum(np.abs(G[:, 1:]), 1e-3))
    out.append(("gradient_G0", float(err), 1e-6))

    hl = 1e-3 * r[:, None]
    lap = sum(
        (G_vector(x + hl * e[i], params) - 2 * G + G_vector(x - hl * e[i], params)) / hl**2 for i in range(2)
    )
    w = omega_vector(x, params)
    err = np.max(np.abs(lap - w) / np.maximum(np.abs(w), 1e-2))
    out.append(("laplacian_G", float(err), 1e-5))

    n = 64
    t = 2 * np.pi * np.arange(n) / n
    s = 0.0
    tau = t - s
    keep = np.abs(np.angle(np.exp(1j * tau))) >= 1e-3
    xt = np.column_stack([np.cos(t), np.sin(t)])[keep]
    y = np.array([1.0, 0.0])
    nx, ny = -xt, -y
    A, B = split_trace_kernels(xt, y, nx, ny, tau[keep], 1.0, params)
    logf = np.log(4 * np.sin(0.5 * tau[keep]) ** 2)
    direct = trace_kernels(xt, y, nx, ny, params)
    err = np.max(np.abs(A * logf[:, None, None] + B - direct))
    out.append(("split_vs_direct", float(err), 1e-12))
    return out


def cmd_kernel_check(args) -> int:
    params = KernelParams(args.kappa0, args.kappa1)
    checks = kernel_checks(params)
    rows = [(name, err, tol, int(err < tol)) for name, err, tol in checks]
    bio.write_csv(_outpath(args, "kernel_check.csv"), ["check", "error", "tolerance", "passed"], rows)
    failed = [name for name, err, tol in checks if not err < tol]
    if failed:
        raise ConvergenceError(f"kernel checks failed: {' '.join(failed)}")
    return EXIT_OK


COMMANDS = {
    "robin": cmd_robin,
    "scales": cmd_scales,
    "solve": cmd_solve,
    "converge": cmd_converge,
    "kernel-check": cmd_kernel_check,
}


def _fail(exc: CLIError) -> int:
    parts = [f"error code={exc.code}", f"kind={exc.kind}", f"message={json.dumps(str(exc))}"]
    parts += [f"{k}={bio.fmt(v)}" for k, v in exc.extra.items()]
    print(" ".join(parts), file=sys.stderr)
    return exc.code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        args = resolve_config(args)
        if args.out is not None:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args)
    except CLIError as exc:
        return _fail(exc)
    except (GeometryError, NearBoundaryError, SingularEvaluationError) as exc:
        return _fail(CLIError(EXIT_INPUT, "geometry", str(exc)))
    except ConvergenceError as exc:
        return _fail(CLIError(EXIT_CONVERGENCE, "convergence", str(exc)))
    except DegenerateScaleError as exc:
        return _fail(CLIError(EXIT_SINGULAR, "degenerate", str(exc)))
    except LinearAlgebraError as exc:
        return _fail(CLIError(EXIT_SINGULAR, "singular", str(exc)))
    except (ValueError, OSError) as exc:
        return _fail(CLIError(EXIT_INPUT, "input", str(exc)))
    except BiharmonicError as exc:
        return _fail(CLIError(EXIT_SINGULAR, "solver", str(exc)))


if __name__ == "__main__":
    sys.exit(main())
