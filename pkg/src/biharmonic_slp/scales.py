"""Degenerate scales: values of rho for which V on rho*Gamma is singular.

Two independent detectors are provided: zeros of the Robin-matrix eigenvalue
branches rho -> eig(Lambda(rho Gamma_e)), and dips of the smallest singular
value of the (Sobolev-normalised) discrete operator V on rho*Gamma.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .assembly import assemble_V, normalized_singular_values
from .geometry import MultiCurve, scale_about_origin
from .kernels import DEFAULT_PARAMS, KernelParams
from .robin import RobinMatrix, robin_matrix

logger = logging.getLogger(__name__)

PAD = 0.10


@dataclass(frozen=True)
class ScaleRoot:
    rho: float
    branch: int  # index of the lowest sorted eigenvalue vanishing at rho
    multiplicity: int


@dataclass
class ScaleScanResult:
    rho: np.ndarray
    eigenvalues: np.ndarray  # (G, 3) sorted ascending at each rho
    branches: np.ndarray  # (G, 3) nearest-neighbour continued
    determinants: np.ndarray
    interval: tuple[float, float]
    params: KernelParams
    roots: list[ScaleRoot] = field(default_factory=list)
    ambiguous_cells: list[int] = field(default_factory=list)
    sigma_min: np.ndarray | None = None


def admissible_interval(multi: MultiCurve, pad: float = PAD) -> tuple[float, float]:
    """(1/(e R+), 1/(e R-)) widened by ``pad`` on both sides."""
    r_minus, r_plus = multi.radii
    return (1 - pad) / (math.e * r_plus), (1 + pad) / (math.e * r_minus)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def robin_at_scale(multi: MultiCurve, params: KernelParams, rho: float, n=256) -> RobinMatrix:
    return robin_matrix(scale_about_origin(multi, rho), params, n)


def continue_branches(eigs: np.ndarray, tol: float = 0.0) -> tuple[np.ndarray, list[int]]:
    """Pair eigenvalues across grid points by nearest neighbour.

    Each step picks the permutation closest to a linear extrapolation of the
    branches.  Cells where the best and second-best pairing are within
    ``tol`` of each other are reported as ambiguous.
    """
    out = eigs.copy()
    ambiguous = []
    # permutations that only swap (numerically) equal eigenvalues are not ambiguous
    same = 1e-14 * max(1.0, float(np.abs(eigs).max()))
    perms = list(itertools.permutations(range(eigs.shape[1])))
    for g in range(1, len(eigs)):
        pred = out[g - 1] if g == 1 else 2 * out[g - 1] - out[g - 2]
        costs = sorted((float(np.abs(eigs[g][list(p)] - pred).sum()), p) for p in perms)
        (c0, best), (c1, second) = costs[0], costs[1]
        if c1 - c0 <= tol and not np.allclose(eigs[g][list(best)], eigs[g][list(second)], rtol=0, atol=same):
            ambiguous.append(g - 1)
        out[g] = eigs[g][list(best)]
    return out, ambiguous


def scan_eigenvalues(
    multi: MultiCurve,
    params: KernelParams = DEFAULT_PARAMS,
    rho_grid=None,
    n=256,
    workers: int | None = None,
) -> ScaleScanResult:
    """Robin eigenvalues on a grid of scale factors (no root search)."""
    if rho_grid is None:
        lo, hi = admissible_interval(multi)
        rho_grid = np.linspace(lo, hi, 32)
    rho = np.asarray(rho_grid, dtype=float)
    mats = _map(lambda r: robin_at_scale(multi, params, r, n), rho, workers)
    eigs = np.array([m.eigenvalues for m in mats])
    scale = max(1.0, float(np.abs(eigs).max()))
    branches, ambiguous = continue_branches(eigs, tol=1e-12 * scale)
    return ScaleScanResult(
        rho=rho,
        eigenvalues=eigs,
        branches=branches,
        determinants=np.array([m.determinant for m in mats]),
        interval=(float(rho[0]), float(rho[-1])),
        params=params,
        ambiguous_cells=ambiguous,
    )


def find_degenerate_scales(
    multi: MultiCurve,
    params: KernelParams = DEFAULT_PARAMS,
    n=256,
    tol: float = 1e-6,
    n_grid: int = 32,
    pad: float = PAD,
    xtol: float = 1e-13,
    workers: int | None = None,
    rho_grid=None,
) -> ScaleScanResult:
    """Scan the padded admissible interval and locate every eigenvalue root.

    Roots are bracketed on the sorted eigenvalues, which are continuous in rho
    even where branches cross, so a double root (two branches vanishing at
    once, as for the circle) is found on each branch and then merged.  The
    multiplicity counts eigenvalues below ``tol * max(1, |Lambda|)`` at the
    root.  Tangential zeros without a sign change are not detected.  An
    explicit ``rho_grid`` replaces the padded admissible interval.  If branch
    pairing is ambiguous the scan is repeated once on a grid twice as fine.
    """
    if rho_grid is None:
        lo, hi = admissible_interval(multi, pad)
        rho_grid = np.linspace(lo, hi, n_grid)
    rho_grid = np.asarray(rho_grid, dtype=float)
    result = scan_eigenvalues(multi, params, rho_grid, n, workers)
    if result.ambiguous_cells:
        logger.warning("branch pairing ambiguous in cells %s; refining grid", result.ambiguous_cells)
        fine = np.linspace(rho_grid[0], rho_grid[-1], 2 * len(rho_grid) - 1)
        result = scan_eigenvalues(multi, params, fine, n, workers)
        if result.ambiguous_cells:
            logger.warning("branch pairing still ambiguous in cells %s", result.ambiguous_cells)

    cache: dict[float, np.ndarray] = {}

    def eig(rho: float) -> np.ndarray:
        if rho not in cache:
            cache[rho] = robin_at_scale(multi, params, rho, n).eigenvalues
        return cache[rho]

    found: list[tuple[float, int]] = []
    ev, grid = result.eigenvalues, result.rho
    for i in range(3):
        for g in range(len(grid) - 1):
            fa, fb = ev[g, i], ev[g + 1, i]
            if fa == 0.0:
                found.append((grid[g], i))
            elif fa * fb < 0:
                r = brentq(lambda x: eig(x)[i], grid[g], grid[g + 1], xtol=xtol, rtol=1e-15)
                found.append((r, i))
        if ev[-1, i] == 0.0:
            found.append((grid[-1], i))

    found.sort()
    roots: list[ScaleRoot] = []
    for r, i in found:
        if roots and abs(r - roots[-1].rho) <= 1e-8 * r:
            continue
        e = eig(r)
        thresh = tol * max(1.0, float(np.abs(e).max()))
        mult = int(np.sum(np.abs(e) < thresh))
        roots.append(ScaleRoot(float(r), i, max(mult, 1)))
    result.roots = roots
    return result


def sigma_min_at(multi: MultiCurve, params: KernelParams, rho: float, n=128) -> float:
    """Smallest singular value of the normalised V on rho*Gamma (holes included)."""
    V = assemble_V(scale_about_origin(multi, rho), params, n)
    return float(normalized_singular_values(V)[-1])


def sigma_min_scan(
    multi: MultiCurve,
    params: KernelParams = DEFAULT_PARAMS,
    rho_grid=None,
    n=128,
    workers: int | None = None,
    n_grid: int = 96,
) -> np.ndarray:
    """Rows (rho, sigma_min) over the grid.

    Dips are narrow (relative width around 1e-2 for unit-size curves), so the
    default grid is denser than the one used for the Robin eigenvalues.
    """
    if rho_grid is None:
        lo, hi = admissible_interval(multi)
        rho_grid = np.linspace(lo, hi, n_grid)
    rho = np.asarray(rho_grid, dtype=float)
    sig = _map(lambda r: sigma_min_at(multi, params, r, n), rho, workers)
    return np.column_stack([rho, sig])


@dataclass(frozen=True)
class SigmaDip:
    rho: float
    sigma: float
    ratio: float  # sigma / median of the scan


def locate_sigma_dips(
    multi: MultiCurve,
    params: KernelParams = DEFAULT_PARAMS,
    scan: np.ndarray | None = None,
    n=128,
    threshold: float = 1e-6,
    xatol: float = 1e-10,
    n_grid: int = 96,
    workers: int | None = None,
) -> list[SigmaDip]:
    """Refine every local minimum of a sigma_min scan; keep the deep ones.

    A dip is kept when the refined sigma_min falls below ``threshold`` times
    the median of the scan.
    """
    if scan is None:
        scan = sigma_min_scan(multi, params, n=n, workers=workers, n_grid=n_grid)
    rho, sig = scan[:, 0], scan[:, 1]
    med = float(np.median(sig))
    dips = []
    for g in range(len(rho)):
        left = sig[g - 1] if g > 0 else np.inf
        right = sig[g + 1] if g < len(rho) - 1 else np.inf
        if not (sig[g] <= left and sig[g] <= right):
            continue
        a = rho[max(g - 1, 0)]
        b = rho[min(g + 1, len(rho) - 1)]
        res = minimize_scalar(
            lambda r: sigma_min_at(multi, params, r, n),
            bounds=(a, b),
            method="bounded",
            options={"xatol": xatol},
        )
        ratio = float(res.fun) / med
        if ratio < threshold:
            dips.append(SigmaDip(float(res.x), float(res.fun), ratio))
    return dips
