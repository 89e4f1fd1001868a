"""Nystrom discretisation of the biharmonic single-layer trace operator.

Unknowns are ordered ``[q0 (all curves), q1 (all curves)]`` and trace rows
``[p0 (all curves), p1 (all curves)]``.  Same-curve interactions use the
log-split kernels with the product rule; interactions between distinct curves
are smooth and use the plain trapezoid rule.

The minimal-energy extension of a trace pair p is represented as
u = S q + a.X with the three moment constraints A(q) = 0, which is a square
"bordered" system of size 2M + 3.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import signal

from . import quadrature
from .errors import DegenerateScaleError, FitError, GeometryError, LinearAlgebraError, NearBoundaryError
from .geometry import CurveSample, MultiCurve, sample, sample_at
from .kernels import (
    DEFAULT_PARAMS,
    KernelParams,
    G_vector,
    affine_basis,
    affine_normal_derivative,
    field_kernels,
    omega,
    split_trace_kernels,
    trace_kernels,
)

logger = logging.getLogger(__name__)

#: minimum distance (in grid spacings) for plain-trapezoid field evaluation
NEAR_SPACINGS = 5.0


@dataclass(frozen=True)
class Discretization:
    multi: MultiCurve
    samples: tuple[CurveSample, ...]

    @classmethod
    def build(cls, multi: MultiCurve, n) -> "Discretization":
        counts = [n] * len(multi.curves) if np.isscalar(n) else list(n)
        if len(counts) != len(multi.curves):
            raise ValueError("one node count per curve expected")
        return cls(multi, tuple(sample(c, int(k)) for c, k in zip(multi.curves, counts)))

    @property
    def counts(self) -> list[int]:
        return [s.n for s in self.samples]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    @property
    def size(self) -> int:
        return int(sum(self.counts))

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([s.points for s in self.samples])

    @property
    def normals(self) -> np.ndarray:
        return np.concatenate([s.normals for s in self.samples])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([s.weights for s in self.samples])

    def split(self, values: np.ndarray) -> list[np.ndarray]:
        off = self.offsets
        return [values[off[i] : off[i + 1]] for i in range(len(self.samples))]


@dataclass(frozen=True)
class TracePair:
    """Nodal Dirichlet (p0) and Neumann (p1) traces, concatenated over curves."""

    p0: np.ndarray
    p1: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.p0, self.p1])

    @classmethod
    def from_function(cls, disc: Discretization, values, gradients) -> "TracePair":
        """Trace pair of a function from its values and gradients at the nodes."""
        g = np.asarray(gradients)
        n = disc.normals
        return cls(np.asarray(values, dtype=float), g[:, 0] * n[:, 0] + g[:, 1] * n[:, 1])


@dataclass(frozen=True)
class DiscreteDensity:
    """Density pair (q0, q1) on the nodes plus an affine part a.X.

    The field it represents is ``S q + a.X``; ``params`` are the kernel
    parameters the density was computed with.
    """

    disc: Discretization
    q0: np.ndarray
    q1: np.ndarray
    a: np.ndarray
    params: KernelParams = DEFAULT_PARAMS

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q0, self.q1])

    def per_curve(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.disc.split(self.q0), self.disc.split(self.q1)))


@dataclass(frozen=True)
class DiscreteOperatorV:
    matrix: np.ndarray
    disc: Discretization
    params: KernelParams

    @property
    def size(self) -> int:
        return self.disc.size

    @property
    def blocks(self) -> dict[str, np.ndarray]:
        m = self.size
        V = self.matrix
        return {"D0": V[:m, :m], "D1": V[:m, m:], "N0": V[m:, :m], "N1": V[m:, m:]}

    def apply(self, density: DiscreteDensity) -> TracePair:
        out = self.matrix @ density.vector
        return TracePair(out[: self.size], out[self.size :])

    def weighted_symmetric(self) -> tuple[np.ndarray, float]:
        """Arc-length weighted matrix W V, symmetrised, and its relative asymmetry."""
        w = np.tile(self.disc.weights, 2)
        wv = w[:, None] * self.matrix
        asym = np.linalg.norm(wv - wv.T) / np.linalg.norm(wv)
        return 0.5 * (wv + wv.T), float(asym)


# -- operator assembly -----------------------------------------------------


def trace_rows(disc: Discretization, params: KernelParams, curve: int, t=None) -> np.ndarray:
    """Rows mapping (q0, q1) to (p0, p1) at parameters ``t`` of one curve.

    With ``t=None`` the rows are taken at that curve's own nodes.  The result
    has shape (2T, 2M): T Dirichlet rows followed by T Neumann rows.
    """
    own = disc.samples[curve]
    on_grid = t is None
    target = own if on_grid else sample_at(disc.multi.curves[curve], np.asarray(t, dtype=float))
    T = len(target.t)
    M = disc.size
    rows = np.empty((2, T, 2, M))
    off = disc.offsets
    for j, src in enumerate(disc.samples):
        cols = slice(off[j], off[j + 1])
        x = target.points[:, None, :]
        y = src.points[None, :, :]
        nx = target.normals[:, None, :]
        ny = src.normals[None, :, :]
        if j == curve:
            tau = target.t[:, None] - src.t[None, :]
            A, B = split_trace_kernels(x, y, nx, ny, tau, target.speed[:, None], params)
            R = quadrature.log_weight_matrix(src.n) if on_grid else quadrature.log_weights(src.n, target.t)
            h = 2 * np.pi / src.n
            block = (R[..., None, None] * A + h * B) * src.speed[None, :, None, None]
        else:
            block = trace_kernels(x, y, nx, ny, params) * src.weights[None, :, None, None]
        rows[:, :, :, cols] = np.moveaxis(block, (2, 3), (0, 2))
    return rows.reshape(2 * T, 2 * M)


def assemble_V(multi: MultiCurve, params: KernelParams = DEFAULT_PARAMS, n=256) -> DiscreteOperatorV:
    """Nystrom matrix of the total-trace single-layer operator on ``multi``."""
    disc = n if isinstance(n, Discretization) else Discretization.build(multi, n)
    M = disc.size
    off = disc.offsets
    V = np.empty((2 * M, 2 * M))
    for c in range(len(disc.samples)):
        rows = trace_rows(disc, params, c)
        T = disc.samples[c].n
        V[off[c] : off[c + 1]] = rows[:T]
        V[M + off[c] : M + off[c + 1]] = rows[T:]
    if not np.all(np.isfinite(V)):
        raise GeometryError("non-finite operator entries (overlapping curves?)")
    return DiscreteOperatorV(V, disc, params)


def affine_trace_columns(disc: Discretization) -> np.ndarray:
    """(2M, 3) columns: Dirichlet rows X(x_i), Neumann rows d_n X(x_i)."""
    return np.vstack([affine_basis(disc.points), affine_normal_derivative(disc.normals)])


def moment_rows(disc: Discretization) -> np.ndarray:
    """(3, 2M) quadrature of the functional q -> int q0 X + q1 d_n X ds."""
    w = disc.weights[:, None]
    return np.vstack([w * affine_basis(disc.points), w * affine_normal_derivative(disc.normals)]).T


def moment_vector(q: DiscreteDensity) -> np.ndarray:
    """Far-field moments A(q) = int q0 X + q1 d_n X ds."""
    return moment_rows(q.disc) @ q.vector


# -- bordered (moment-constrained) system ------------------------------------


@dataclass(frozen=True)
class BorderedSystem:
    matrix: np.ndarray
    lu: tuple
    rcond: float
    V: DiscreteOperatorV

    @property
    def disc(self) -> Discretization:
        return self.V.disc


def build_bordered(V: DiscreteOperatorV) -> BorderedSystem:
    """Factorise [[V, X], [A, 0]]; its solution realises the minimal extension."""
    disc = V.disc
    M = disc.size
    K = np.zeros((2 * M + 3, 2 * M + 3))
    K[: 2 * M, : 2 * M] = V.matrix
    K[: 2 * M, 2 * M :] = affine_trace_columns(disc)
    K[2 * M :, : 2 * M] = moment_rows(disc)
    lu = sla.lu_factor(K, check_finite=True)
    anorm = np.linalg.norm(K, 1)
    rcond, info = sla.lapack.dgecon(lu[0], anorm, norm="1")
    if info != 0 or rcond < 1e-15:
        raise LinearAlgebraError(f"singular bordered system (rcond={rcond:.3e})")
    if rcond < 1e-13:
        logger.debug("bordered system poorly conditioned: rcond=%.3e", rcond)
    return BorderedSystem(K, lu, float(rcond), V)


def solve_trace(system: BorderedSystem, p: TracePair) -> DiscreteDensity:
    """Density (q, a) with V q + trace(a.X) = p and A(q) = 0."""
    M = system.disc.size
    rhs = np.concatenate([p.vector, np.zeros(3)])
    sol = sla.lu_solve(system.lu, rhs)
    if not np.all(np.isfinite(sol)):
        raise LinearAlgebraError("bordered solve produced non-finite values")
    return DiscreteDensity(system.disc, sol[:M], sol[M : 2 * M], sol[2 * M :], system.V.params)


def solve_trace_many(system: BorderedSystem, ps: Sequence[TracePair]) -> list[DiscreteDensity]:
    """Several right-hand sides against one factorisation."""
    M = system.disc.size
    rhs = np.column_stack([np.concatenate([p.vector, np.zeros(3)]) for p in ps])
    sol = sla.lu_solve(system.lu, rhs)
    return [
        DiscreteDensity(system.disc, s[:M], s[M : 2 * M], s[2 * M :], system.V.params)
        for s in sol.T
    ]


def solve_V(V: DiscreteOperatorV, p: TracePair, cond_limit: float = 1e12) -> DiscreteDensity:
    """Plain single-layer solve V q = p (affine part zero).

    Raises :class:`DegenerateScaleError` when V is numerically singular.  The
    test uses the Sobolev-normalised matrix, whose condition number grows only
    linearly in N away from degenerate scales (the raw one grows like N^3).
    """
    cond = np.linalg.cond(normalized_V(V))
    if not np.isfinite(cond) or cond > cond_limit:
        raise DegenerateScaleError(f"single-layer operator near-singular (cond={cond:.3e})")
    sol = np.linalg.solve(V.matrix, p.vector)
    M = V.size
    return DiscreteDensity(V.disc, sol[:M], sol[M:], np.zeros(3), V.params)


# -- off-curve field evaluation ------------------------------------------------


class FieldValues(NamedTuple):
    u: np.ndarray
    grad: np.ndarray
    lap: np.ndarray
    grad_lap: np.ndarray


def boundary_distance(disc: Discretization, points) -> np.ndarray:
    """Per-point distance to the nearest node, in units of that curve's spacing."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(pts), np.inf)
    for s in disc.samples:
        d = np.linalg.norm(pts[:, None, :] - s.points[None, :, :], axis=-1).min(axis=1)
        best = np.minimum(best, d / s.spacing)
    return best


def eval_field(q: DiscreteDensity, points, min_spacings: float = NEAR_SPACINGS) -> FieldValues:
    """u, grad u, lap u and grad lap u of S q + a.X at points off the curves."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dist = boundary_distance(q.disc, pts)
    if np.any(dist < min_spacings):
        worst = float(dist.min())
        raise NearBoundaryError(
            f"evaluation point within {worst:.2f} grid spacings of a curve", distance=worst
        )
    disc = q.disc
    y, ny, w = disc.points, disc.normals, disc.weights
    wq0 = w * q.q0
    wq1 = w * q.q1
    u = np.empty(len(pts))
    grad = np.empty((len(pts), 2))
    lap = np.empty(len(pts))
    glap = np.empty((len(pts), 2))
    step = max(1, 2**20 // max(1, len(y)))
    for i in range(0, len(pts), step):
        x = pts[i : i + step]
        k = field_kernels(x[:, None, :] - y[None, :, :], ny[None, :, :], q.params)
        u[i : i + step] = k.u[..., 0] @ wq0 + k.u[..., 1] @ wq1
        grad[i : i + step] = np.einsum("pmc,m->pc", k.grad[..., 0, :], wq0) + np.einsum(
            "pmc,m->pc", k.grad[..., 1, :], wq1
        )
        lap[i : i + step] = k.lap[..., 0] @ wq0 + k.lap[..., 1] @ wq1
        glap[i : i + step] = np.einsum("pmc,m->pc", k.grad_lap[..., 0, :], wq0) + np.einsum(
            "pmc,m->pc", k.grad_lap[..., 1, :], wq1
        )
    u += affine_basis(pts) @ q.a
    grad += q.a[1:]
    return FieldValues(u, grad, lap, glap)


def trace_at(q: DiscreteDensity, curve: int, t) -> TracePair:
    """On-curve total trace of S q + a.X at arbitrary parameters of one curve.

    Uses the same product rule as the operator (Nystrom interpolation), so it
    is spectrally accurate between nodes.
    """
    t = np.asarray(t, dtype=float)
    rows = trace_rows(q.disc, q.params, curve, t)
    vals = rows @ q.vector
    target = sample_at(q.disc.multi.curves[curve], t)
    T = len(t)
    p0 = vals[:T] + affine_basis(target.points) @ q.a
    p1 = vals[T:] + affine_normal_derivative(target.normals) @ q.a
    return TracePair(p0, p1)


# -- far-field expansion ---------------------------------------------------------


@dataclass(frozen=True)
class FarFieldExpansion:
    """Fitted coefficients of S q ~ A.G + B omega0 + C cos2th + D sin2th + O(1/|x|)."""

    A: np.ndarray
    B: float
    C: float
    D: float
    residual: float
    moments: np.ndarray

    @property
    def moment_mismatch(self) -> float:
        return float(np.linalg.norm(self.A - self.moments))


def _far_field_design(x: np.ndarray, params: KernelParams, orders: int) -> np.ndarray:
    r = np.hypot(x[:, 0], x[:, 1])
    th = np.arctan2(x[:, 1], x[:, 0])
    cols = [G_vector(x, params)[:, j] for j in range(3)]
    cols += [omega(x, 0, params), np.cos(2 * th), np.sin(2 * th)]
    # remainder families r^-k {cos,sin}(k th) and r^-k {cos,sin}((k+2) th)
    for k in range(1, orders + 1):
        for m in (k, k + 2):
            cols += [r**-k * np.cos(m * th), r**-k * np.sin(m * th)]
    return np.column_stack(cols)


def far_field_fit(q: DiscreteDensity, radii, n_angles: int = 64, orders: int = 4) -> FarFieldExpansion:
    """Least-squares far-field coefficients of the single-layer part S q.

    The affine part ``q.a`` is not included in the fitted field.  Higher
    multipole families up to ``orders`` are fitted as nuisance terms.
    """
    radii = np.asarray(sorted(radii), dtype=float)
    if len(radii) < 3:
        raise FitError("at least three radii are needed")
    r_plus = q.disc.multi.r_plus
    if np.isfinite(r_plus) and radii[0] < 4 * r_plus * (1 - 1e-12):
        raise FitError(f"radii must be >= 4 R+ = {4 * r_plus:.6g}")
    th = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    x = np.concatenate([np.column_stack([R * np.cos(th), R * np.sin(th)]) for R in radii])
    bare = DiscreteDensity(q.disc, q.q0, q.q1, np.zeros(3), q.params)
    f = eval_field(bare, x).u
    design = _far_field_design(x, q.params, orders)
    scale = np.linalg.norm(design, axis=0)
    Ds = design / scale
    if np.linalg.cond(Ds) > 1e12:
        raise FitError("ill-conditioned far-field design")
    coef, *_ = np.linalg.lstsq(Ds, f, rcond=None)
    coef = coef / scale
    resid = float(np.linalg.norm(design @ coef - f) / max(np.linalg.norm(f), 1e-300))
    return FarFieldExpansion(coef[:3], coef[3], coef[4], coef[5], resid, moment_vector(q))


# -- Sobolev-normalised diagnostics ------------------------------------------------


def sobolev_transform(n: int, s: float) -> np.ndarray:
    """Circulant matrix multiplying Fourier mode m of nodal data by (1 + |m|)^s."""
    m = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    col = np.real(np.fft.ifft((1.0 + m) ** s))
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def sobolev_scaling(disc: Discretization) -> np.ndarray:
    """Block-diagonal scaling mapping (H^{3/2} x H^{1/2})-type data to L^2.

    The same matrix scales rows (traces) and columns (densities) of V, so
    that ``T V T`` is a zeroth-order discrete operator.  The circulant factor
    is conjugated by the local speed to the power -s/2, which turns
    parametric frequency into arclength frequency and removes the l^3, l^2, l
    powers of the D, D/N and N blocks.
    """
    M = disc.size
    T = np.zeros((2 * M, 2 * M))
    off = disc.offsets
    for c, smp in enumerate(disc.samples):
        for start, s in ((0, 1.5), (M, 0.5)):
            sl = slice(start + off[c], start + off[c + 1])
            d = smp.speed ** (-0.5 * s)
            T[sl, sl] = d[:, None] * sobolev_transform(smp.n, s) * d[None, :]
    return T


def normalized_V(V: DiscreteOperatorV) -> np.ndarray:
    T = sobolev_scaling(V.disc)
    return T @ V.matrix @ T


def normalized_singular_values(V: DiscreteOperatorV) -> np.ndarray:
    """Singular values of the Sobolev-normalised operator, descending."""
    return sla.svdvals(normalized_V(V))


def bordered_rcond(system: BorderedSystem) -> float:
    """Reciprocal 2-norm condition number of the normalised bordered matrix."""
    M = system.disc.size
    T = np.eye(2 * M + 3)
    T[: 2 * M, : 2 * M] = sobolev_scaling(system.disc)
    s = sla.svdvals(T @ system.matrix @ T)
    return float(s[-1] / s[0])


def trig_interpolation_matrix(n: int, m: int) -> np.ndarray:
    """Matrix taking samples on n equispaced nodes to the trig interpolant on m >= n nodes."""
    return signal.resample(np.eye(n), m, axis=0)


def energy_matrix(multi: MultiCurve, params: KernelParams, n, oversample: int = 2) -> np.ndarray:
    """Symmetric matrix of the energy form <V q, q> on trigonometric densities.

    Densities are trig interpolants of their nodal values on each curve; the
    form is evaluated with a Nystrom discretisation ``oversample`` times finer.
    Unlike the plain weighted Nystrom matrix, whose modes near the Nyquist
    frequency alias against the non-constant speed, this stays accurate on the
    whole trigonometric space.
    """
    coarse = Discretization.build(multi, n)
    fine_counts = [oversample * s.n for s in coarse.samples]
    W, _ = assemble_V(multi, params, Discretization.build(multi, fine_counts)).weighted_symmetric()
    blocks = [trig_interpolation_matrix(s.n, oversample * s.n) for s in coarse.samples]
    P = sla.block_diag(*(blocks + blocks))
    E = P.T @ W @ P
    return 0.5 * (E + E.T)


def refine_density(q: DiscreteDensity, factor: int) -> DiscreteDensity:
    """Trig interpolation of a density onto ``factor`` times as many nodes per curve.

    The field of the refined density is the same layer potential evaluated
    with a finer trapezoid rule, so it can be used closer to the curves.
    """
    disc = Discretization.build(q.disc.multi, [factor * s.n for s in q.disc.samples])
    q0, q1 = [], []
    for smp, (a, b) in zip(q.disc.samples, q.per_curve()):
        P = trig_interpolation_matrix(smp.n, factor * smp.n)
        q0.append(P @ a)
        q1.append(P @ b)
    return DiscreteDensity(disc, np.concatenate(q0), np.concatenate(q1), q.a, q.params)
