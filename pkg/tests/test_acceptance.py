"""Acceptance criteria AC1-AC12 at their pinned tolerances.

Each test prints one ``ACn PASS|FAIL`` line; run with ``pytest -s`` to see them.
"""

import math
import time

import numpy as np
import pytest

from biharmonic_slp.assembly import (
    DiscreteDensity,
    TracePair,
    affine_trace_columns,
    assemble_V,
    build_bordered,
    energy_matrix,
    eval_field,
    far_field_fit,
    moment_vector,
    solve_trace,
)
from biharmonic_slp.geometry import ParamCurve, make_multicurve, multicurve_from_spec
from biharmonic_slp.kernels import G0, KernelParams, circle_closed_forms, grad_G_vector
from biharmonic_slp.robin import ExteriorProblem, SDagger, check_criteria, robin_matrix, sdagger_trace_residual
from biharmonic_slp.scales import find_degenerate_scales, locate_sigma_dips

P = KernelParams(1.0, 0.0)
INV_E = 1 / math.e
BUILTINS = {
    "circle": "circle:r=1",
    "ellipse": "ellipse:a=2,b=1",
    "kite": "kite",
    "annulus": "circle:r=1+circle:r=0.3,cx=0.2",
    "two-circles": "circle:r=1,cx=-2+circle:r=1,cx=2",
}


def report(tag: str, ok: bool, detail: str) -> None:
    print(f"{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def _random_geometries(seed: int, count: int = 5):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = i % 5
        if kind == 0:
            a, b = rng.uniform(0.5, 2.0, 2)
            curves = [ParamCurve("ellipse", (a, b))]
        elif kind == 1:
            curves = [ParamCurve("kite", (rng.uniform(0.5, 1.5),))]
        elif kind == 2:
            coeffs = rng.uniform(-0.12, 0.12, 4)
            curves = [ParamCurve("trig", (rng.uniform(0.7, 1.3), *coeffs))]
        elif kind == 3:
            r = rng.uniform(0.4, 0.8, 2)
            curves = [ParamCurve("circle", (r[0],), (-1.2, 0.0)), ParamCurve("circle", (r[1],), (1.2, 0.3))]
        else:
            a = rng.uniform(1.0, 2.0)
            curves = [ParamCurve("ellipse", (a, 0.8)), ParamCurve("circle", (0.2,), (0.3 * a, 0.1))]
        out.append(make_multicurve(curves))
    return out


def test_ac01_circle_robin_matrix():
    t0 = time.perf_counter()
    lam = robin_matrix(multicurve_from_spec("circle:r=1"), P, 256, probe_radius=2.0)
    elapsed = time.perf_counter() - t0
    expect = np.diag([-1 / (8 * math.pi), -1 / (4 * math.pi), -1 / (4 * math.pi)])
    err = float(np.max(np.abs(lam.matrix - expect)))
    off = float(np.max(np.abs(lam.matrix - np.diag(np.diag(lam.matrix)))))
    report("AC1", err <= 1e-7 and off <= 1e-8 and elapsed < 5,
           f"max entry error {err:.2e}, off-diagonal {off:.2e}, {elapsed:.2f} s")


def test_ac02_circle_degenerate_scale():
    circle = multicurve_from_spec("circle:r=1")
    t0 = time.perf_counter()
    res = find_degenerate_scales(circle, P, n=256, n_grid=32)
    elapsed = time.perf_counter() - t0
    dips = locate_sigma_dips(circle, P)
    ok = len(res.roots) == 1 and len(dips) >= 1
    if ok:
        root = res.roots[0]
        dip = min(dips, key=lambda d: abs(d.rho - root.rho))
        ok = abs(root.rho - INV_E) <= 1e-6 and root.multiplicity == 2 and abs(dip.rho - root.rho) <= 1e-3
        detail = (f"rho*={root.rho:.12f} (|err| {abs(root.rho - INV_E):.1e}), multiplicity {root.multiplicity}, "
                  f"sigma dip at {dip.rho:.10f}, scan {elapsed:.1f} s")
    else:
        detail = f"roots {res.roots}, dips {dips}"
    report("AC2", ok and elapsed < 60, detail)


def test_ac03_bracket_identity():
    worst = {}
    for name in ("circle", "ellipse", "kite"):
        ext = ExteriorProblem(multicurve_from_spec(BUILTINS[name]), P, 256)
        cols = affine_trace_columns(ext.disc)
        M = ext.disc.size
        B = np.column_stack([ext.bracket(TracePair(cols[:M, k], cols[M:, k])).values for k in range(3)])
        worst[name] = float(np.max(np.abs(B - np.eye(3))))
    report("AC3", max(worst.values()) <= 1e-9, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_ac04_symmetry_and_probe_independence():
    rows, ok = [], True
    for name, spec in BUILTINS.items():
        multi = multicurve_from_spec(spec)
        a = robin_matrix(multi, P, 256, probe_radius=2 * multi.r_plus)
        b = robin_matrix(multi, P, 256, probe_radius=4 * multi.r_plus)
        norm = np.linalg.norm(a.matrix)
        asym = max(a.asymmetry, b.asymmetry) / norm
        probe = np.linalg.norm(a.matrix - b.matrix) / norm
        ok &= asym < 1e-7 and probe < 1e-6
        rows.append(f"{name} asym {asym:.1e} probe {probe:.1e}")
    report("AC4", ok, "; ".join(rows))


def test_ac05_monotonicity():
    circle = robin_matrix(multicurve_from_spec("circle:r=1"), P, 256).eigenvalues
    ellipse = robin_matrix(multicurve_from_spec("ellipse:a=1,b=0.5"), P, 256).eigenvalues
    kite_multi = multicurve_from_spec("kite")
    kite = robin_matrix(kite_multi, P, 256).eigenvalues
    outer = robin_matrix(multicurve_from_spec(f"circle:r={1.05 * kite_multi.r_plus}"), P, 256).eigenvalues
    m1 = float(np.max(circle - ellipse))
    m2 = float(np.max(outer - kite))
    report("AC5", m1 <= 1e-7 and m2 <= 1e-7,
           f"max(lambda_circle - lambda_ellipse) {m1:.3e}, max(lambda_enclosing - lambda_kite) {m2:.3e}")


def test_ac06_hole_invariance():
    grid = np.linspace(0.3, 0.45, 16)
    outer = multicurve_from_spec("circle:r=1")
    annulus = multicurve_from_spec("circle:r=1+circle:r=0.3,cx=0.2")
    r_out = find_degenerate_scales(outer, P, n=256, rho_grid=grid).roots
    r_ann = find_degenerate_scales(annulus, P, n=256, rho_grid=grid).roots
    d_out = locate_sigma_dips(outer, P)
    d_ann = locate_sigma_dips(annulus, P)
    ok = len(r_out) == len(r_ann) == 1 and len(d_out) == len(d_ann) >= 1
    root_diff = abs(r_out[0].rho - r_ann[0].rho) if ok else math.inf
    dip_diff = max(abs(a.rho - b.rho) for a, b in zip(d_out, d_ann)) if ok else math.inf
    report("AC6", ok and root_diff <= 1e-6 and dip_diff <= 1e-3,
           f"root difference {root_diff:.1e}, sigma dip difference {dip_diff:.1e}")


def test_ac07_definiteness_criteria():
    rng = np.random.default_rng(7)
    violations, rows = 0, []
    for multi in _random_geometries(11):
        k0 = math.e * multi.r_plus * rng.uniform(1.05, 2.0)
        pos = KernelParams(k0, (k0 / math.e) ** 2 * rng.uniform(1.05, 2.0))
        k0 = math.e * multi.r_minus / rng.uniform(1.05, 2.0)
        neg = KernelParams(k0, (k0 / math.e) ** 2 / rng.uniform(1.05, 2.0) - rng.uniform(0, 1))
        for params, want in ((pos, "positive"), (neg, "negative")):
            assert check_criteria(multi, params).prediction == want
            got = robin_matrix(multi, params, 256).definiteness
            violations += got != want
            rows.append(f"{want[:3]}->{got[:3]}")
    report("AC7", violations == 0, f"{violations} violations over {len(rows)} cases ({' '.join(rows)})")


def test_ac08_strong_ellipticity_surrogate():
    rng = np.random.default_rng(8)
    rows, ok = [], True
    for multi in _random_geometries(11)[:3] + [multicurve_from_spec(s) for s in BUILTINS.values()]:
        k0 = math.e * multi.r_plus * rng.uniform(1.05, 2.0)
        params = KernelParams(k0, (k0 / math.e) ** 2 * rng.uniform(1.05, 2.0))
        emin = float(np.linalg.eigvalsh(energy_matrix(multi, params, 256))[0])
        ok &= emin > 0
        rows.append(f"{emin:.2e}")
    report("AC8", ok, f"min eigenvalue of the energy matrix at N=256: {' '.join(rows)}")


def test_ac09_interior_manufactured_solution():
    kite = multicurve_from_spec("kite")
    z = np.array([3.0, 0.0])
    V = assemble_V(kite, P, 256)
    d = V.disc.points - z
    p = TracePair.from_function(V.disc, G0(d), grad_G_vector(d)[:, 0, :])
    q = solve_trace(build_bordered(V), p)
    # 20 probe points on a shrunken copy of the kite
    t = 2 * np.pi * np.arange(20) / 20
    c = kite.curves[0]
    centre = np.array(c.center)
    pts = centre + 0.5 * (c(t) - centre)
    assert np.all(kite.in_bounded_region(pts))
    err = float(np.max(np.abs(eval_field(q, pts).u - G0(pts - z))))
    report("AC9", err <= 1e-6, f"max interior error {err:.2e} over 20 points")


def test_ac10_far_field_consistency():
    rng = np.random.default_rng(10)
    kite = multicurve_from_spec("kite")
    V = assemble_V(kite, P, 256)
    t = V.disc.samples[0].t
    worst = 0.0
    for _ in range(3):
        c = rng.normal(size=(2, 5))
        q0 = c[0] @ np.vstack([np.ones_like(t), np.cos(t), np.sin(t), np.cos(2 * t), np.sin(3 * t)])
        q1 = c[1] @ np.vstack([np.ones_like(t), np.cos(t), np.sin(2 * t), np.cos(3 * t), np.sin(t)])
        q = DiscreteDensity(V.disc, q0, q1, np.zeros(3), P)
        A = moment_vector(q)
        fit = far_field_fit(q, 4 * kite.r_plus * np.array([1, 2, 4, 8]))
        worst = max(worst, float(np.linalg.norm(fit.A - A) / max(np.linalg.norm(A), 1e-300)))

    pc = rng.normal(size=(2, 4)) / np.arange(1, 5) ** 2
    p = TracePair(pc[0] @ np.vstack([np.cos(k * t) for k in range(4)]),
                  pc[1] @ np.vstack([np.sin(k * t) + 0.5 * np.cos(k * t) for k in range(4)]))
    dens = solve_trace(build_bordered(V), p)
    radii = np.geomspace(1e2, 1e4, 9)
    th = 2 * np.pi * (np.arange(64) + 0.5) / 64
    lap = [np.max(np.abs(eval_field(dens, np.column_stack([r * np.cos(th), r * np.sin(th)])).lap)) for r in radii]
    slope = float(np.polyfit(np.log(radii), np.log(lap), 1)[0])
    exponent_ok = abs(slope + 1) <= 0.05
    report("AC10", worst <= 1e-6 and exponent_ok,
           f"moment fit relative error {worst:.1e}; fitted decay exponent of the Laplacian {slope:.3f} "
           f"(required -1 within 5%; the moment constraints remove the 1/|x| term, leaving 1/|x|^2)")


def test_ac11_sdagger_reconstruction():
    ellipse = multicurve_from_spec("ellipse:a=2,b=1")
    c = np.random.default_rng(11).normal(size=6)

    def data(points, normals):
        x, y = points[:, 0], points[:, 1]
        return (c[0] + c[1] * np.exp(0.3 * x) * np.cos(0.5 * y) + c[2] * x * y,
                c[3] + c[4] * np.sin(x) + c[5] * y**2)

    resid = sdagger_trace_residual(ellipse, P, data, n=256)
    sd = SDagger(ellipse, P, data, n=256)
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    pts = np.vstack([r * np.column_stack([2 * np.cos(th), np.sin(th)]) for r in (0.4, 0.7, 1.4, 2.5, 6.0)])
    diff = float(np.max(np.abs(sd.field(pts) - eval_field(sd.single_layer_density(), pts).u)))
    report("AC11", resid < 1e-7 and diff < 1e-7, f"trace residual {resid:.1e}, field difference {diff:.1e}")


def test_ac12_convergence():
    circle = multicurve_from_spec("circle:r=1")
    exact = np.diag(circle_closed_forms(1.0, P).lam)
    ns = [32, 64, 128, 256]
    errs = [float(np.max(np.abs(robin_matrix(circle, P, n).matrix - exact))) for n in ns]
    # a doubling passes if the error drops 100x or is already at roundoff
    floor = 1e-12 * max(1.0, float(np.abs(exact).max()))
    steps = [e1 <= e0 / 100 or e1 <= floor for e0, e1 in zip(errs, errs[1:])]
    ok = all(steps) and errs[-1] <= floor
    report("AC12", ok, "circle errors " + " ".join(f"N={n}:{e:.1e}" for n, e in zip(ns, errs)))
