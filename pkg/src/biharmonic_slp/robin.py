"""Robin matrix of a multi-connected curve and the operator built from it.

The bracket [G_j, p] is never evaluated on the curves themselves.  The
minimal extension u = S q + a.X of p is computed on the exterior boundary and
the four-term bracket is integrated on an origin-centred probe circle that
encloses everything, where all integrands are smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .assembly import (
    NEAR_SPACINGS,
    BorderedSystem,
    DiscreteDensity,
    Discretization,
    FieldValues,
    TracePair,
    assemble_V,
    boundary_distance,
    build_bordered,
    eval_field,
    refine_density,
    solve_trace,
    solve_trace_many,
    solve_V,
    trace_at,
)
from .errors import DegenerateScaleError, GeometryError
from .geometry import MultiCurve, sample_at
from .kernels import (
    DEFAULT_PARAMS,
    KernelParams,
    G_vector,
    grad_G_vector,
    grad_omega_vector,
    omega_vector,
)

DEFAULT_TOL = 1e-6
DEFAULT_PROBE_NODES = 256

#: boundary data callable: (points, normals) -> (p0, p1)
BoundaryData = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ProbeCircle:
    radius: float
    points: np.ndarray
    normals: np.ndarray  # inward, towards the origin
    weights: np.ndarray

    @classmethod
    def make(cls, radius: float, m: int = DEFAULT_PROBE_NODES) -> "ProbeCircle":
        th = 2 * np.pi * np.arange(m) / m
        unit = np.column_stack([np.cos(th), np.sin(th)])
        return cls(radius, radius * unit, -unit, np.full(m, 2 * np.pi * radius / m))


def probe_bracket(u: FieldValues, probe: ProbeCircle, params: KernelParams) -> np.ndarray:
    """[G_j, gamma_C u]_C for j = 0, 1, 2, with u biharmonic outside the probe.

    -int d_n(omega_j) u + int omega_j d_n u - int d_n(G_j) lap u + int G_j d_n(lap u)
    """
    x, n, w = probe.points, probe.normals, probe.weights
    om = omega_vector(x, params)
    dn_om = np.einsum("pjc,pc->pj", grad_omega_vector(x, params), n)
    G = G_vector(x, params)
    dn_G = np.einsum("pjc,pc->pj", grad_G_vector(x, params), n)
    dn_u = np.einsum("pc,pc->p", u.grad, n)
    dn_lap = np.einsum("pc,pc->p", u.grad_lap, n)
    integrand = (
        -dn_om * u.u[:, None]
        + om * dn_u[:, None]
        - dn_G * u.lap[:, None]
        + G * dn_lap[:, None]
    )
    return w @ integrand


def trace_of_G(disc: Discretization, params: KernelParams) -> list[TracePair]:
    """Nodal total traces of G_0, G_1, G_2."""
    pts, nrm = disc.points, disc.normals
    vals = G_vector(pts, params)
    dn = np.einsum("pjc,pc->pj", grad_G_vector(pts, params), nrm)
    return [TracePair(vals[:, k], dn[:, k]) for k in range(3)]


def default_probe_radius(multi: MultiCurve, params: KernelParams) -> float:
    return 2.0 * max(multi.r_plus, params.kappa0)


@dataclass(frozen=True)
class BracketVector:
    values: np.ndarray
    probe_radius: float


def _classify_eigs(eigs: np.ndarray, tol: float) -> str:
    scale = max(1.0, float(np.max(np.abs(eigs))))
    if np.min(np.abs(eigs)) < tol * scale:
        return "singular"
    if np.all(eigs > 0):
        return "positive"
    if np.all(eigs < 0):
        return "negative"
    return "indefinite"


@dataclass(frozen=True)
class RobinMatrix:
    """Symmetrised Robin matrix with its spectral data and diagnostics."""

    matrix: np.ndarray
    raw: np.ndarray
    eigenvalues: np.ndarray
    determinant: float
    definiteness: str
    asymmetry: float
    probe_radius: float
    n: int
    tol: float = DEFAULT_TOL

    @classmethod
    def from_raw(cls, raw: np.ndarray, probe_radius: float, n: int, tol: float = DEFAULT_TOL) -> "RobinMatrix":
        sym = 0.5 * (raw + raw.T)
        eigs = np.linalg.eigvalsh(sym)
        return cls(
            matrix=sym,
            raw=raw,
            eigenvalues=eigs,
            determinant=float(np.prod(eigs)),
            definiteness=_classify_eigs(eigs, tol),
            asymmetry=float(np.linalg.norm(raw - raw.T)),
            probe_radius=probe_radius,
            n=n,
            tol=tol,
        )

    @property
    def relative_asymmetry(self) -> float:
        return self.asymmetry / float(np.linalg.norm(self.matrix))

    def as_dict(self) -> dict:
        d = {f"L{j}{k}": float(self.matrix[j, k]) for j in range(3) for k in range(3)}
        d.update({f"eig{i + 1}": float(v) for i, v in enumerate(self.eigenvalues)})
        d.update(
            det=self.determinant,
            definiteness=self.definiteness,
            asymmetry=self.asymmetry,
            relative_asymmetry=self.relative_asymmetry,
            n=self.n,
            probe_radius=self.probe_radius,
        )
        return d


def classify(robin, tol: float = DEFAULT_TOL) -> str:
    """Definiteness class of a symmetric 3x3 matrix or :class:`RobinMatrix`.

    One of ``positive``, ``negative``, ``indefinite`` or ``singular`` (some
    eigenvalue below ``tol * max(1, |lambda|_max)`` in magnitude).
    """
    mat = robin.matrix if isinstance(robin, RobinMatrix) else np.asarray(robin, dtype=float)
    return _classify_eigs(np.linalg.eigvalsh(0.5 * (mat + mat.T)), tol)


class ExteriorProblem:
    """Discretised exterior boundary with a factorised bordered system.

    Everything that depends only on the exterior boundary lives here: the
    minimal extension, the bracket and the Robin matrix.
    """

    def __init__(
        self,
        multi: MultiCurve,
        params: KernelParams = DEFAULT_PARAMS,
        n=256,
        probe_radius: float | None = None,
        probe_nodes: int = DEFAULT_PROBE_NODES,
    ):
        self.multi = multi
        self.exterior = multi.exterior_part()
        self.params = params
        self.n = n
        self.probe_radius = probe_radius or default_probe_radius(multi, params)
        if self.probe_radius <= multi.r_plus:
            raise GeometryError(
                f"probe radius {self.probe_radius:.6g} does not enclose the curves (R+={multi.r_plus:.6g})"
            )
        self.probe = ProbeCircle.make(self.probe_radius, probe_nodes)
        counts = [n] * len(multi.curves) if np.isscalar(n) else list(n)
        ext_counts = [counts[i] for i in multi.exterior_indices()]
        self.disc = Discretization.build(self.exterior, ext_counts)

    @cached_property
    def system(self) -> BorderedSystem:
        return build_bordered(assemble_V(self.exterior, self.params, self.disc))

    def extend(self, p: TracePair) -> DiscreteDensity:
        """Minimal-energy extension of a trace pair given on the exterior nodes."""
        return solve_trace(self.system, p)

    def bracket_of(self, density: DiscreteDensity) -> np.ndarray:
        # coarse grids: interpolate the density until the probe is far enough away
        dist = float(boundary_distance(density.disc, self.probe.points).min())
        if dist < NEAR_SPACINGS:
            density = refine_density(density, 2 ** math.ceil(math.log2(NEAR_SPACINGS / dist)))
        return probe_bracket(eval_field(density, self.probe.points), self.probe, self.params)

    def bracket(self, p: TracePair) -> BracketVector:
        return BracketVector(self.bracket_of(self.extend(p)), self.probe_radius)

    @cached_property
    def G_extensions(self) -> list[DiscreteDensity]:
        """Minimal extensions of the traces of G_0, G_1, G_2."""
        return solve_trace_many(self.system, trace_of_G(self.disc, self.params))

    def robin_matrix(self, tol: float = DEFAULT_TOL) -> RobinMatrix:
        raw = np.column_stack([self.bracket_of(d) for d in self.G_extensions])
        n = self.n if np.isscalar(self.n) else int(max(self.n))
        return RobinMatrix.from_raw(raw, self.probe_radius, n, tol)


def bracket_vector(
    multi: MultiCurve,
    params: KernelParams,
    p: TracePair,
    probe_radius: float | None = None,
    n=256,
) -> BracketVector:
    """[G, p] for a trace pair given on the exterior-boundary nodes."""
    return ExteriorProblem(multi, params, n, probe_radius).bracket(p)


def robin_matrix(
    multi: MultiCurve,
    params: KernelParams = DEFAULT_PARAMS,
    n=256,
    probe_radius: float | None = None,
    tol: float = DEFAULT_TOL,
) -> RobinMatrix:
    """Robin matrix of the exterior boundary of ``multi``."""
    return ExteriorProblem(multi, params, n, probe_radius).robin_matrix(tol)


# -- sufficient criteria -----------------------------------------------------------


@dataclass(frozen=True)
class CriteriaReport:
    prediction: str  # "positive" | "negative" | "inconclusive"
    r_minus: float
    r_plus: float
    kappa0: float
    kappa1: float
    computed: str | None = None
    eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def consistent(self) -> bool | None:
        if self.computed is None or self.prediction == "inconclusive":
            return None
        return self.computed == self.prediction


def check_criteria(
    multi: MultiCurve,
    params: KernelParams,
    compute: bool = False,
    n=256,
) -> CriteriaReport:
    """Evaluate the geometric sufficient conditions for definiteness of the Robin matrix.

    kappa0 > e R+ and kappa1 > (kappa0/e)^2 imply positive definite;
    kappa0 < e R- and kappa1 < (kappa0/e)^2 imply negative definite.
    """
    k0, k1 = params.kappa0, params.kappa1
    r_minus, r_plus = multi.radii
    thresh = (k0 / math.e) ** 2
    if k0 > math.e * r_plus and k1 > thresh:
        pred = "positive"
    elif k0 < math.e * r_minus and k1 < thresh:
        pred = "negative"
    else:
        pred = "inconclusive"
    if not compute:
        return CriteriaReport(pred, r_minus, r_plus, k0, k1)
    lam = robin_matrix(multi, params, n)
    return CriteriaReport(pred, r_minus, r_plus, k0, k1, lam.definiteness, lam.eigenvalues)


# -- reconstruction of the single-layer potential with prescribed trace --------------


class SDagger:
    """Field S^dagger p built from minimal extensions and the Robin matrix.

    Outside the curves it equals S p + c.G - sum_k c_k S(gamma G_k) with
    c = Lambda^{-1} [G, p_e]; inside it equals the minimal extension S p.
    When Lambda is invertible this coincides with the single-layer potential
    whose total trace is p.
    """

    def __init__(
        self,
        multi: MultiCurve,
        params: KernelParams,
        data: BoundaryData,
        n=256,
        probe_radius: float | None = None,
        tol: float = DEFAULT_TOL,
    ):
        self.multi = multi
        self.params = params
        self.data = data
        self.ext = ExteriorProblem(multi, params, n, probe_radius)
        self.robin = self.ext.robin_matrix(tol)
        if self.robin.definiteness == "singular":
            raise DegenerateScaleError(
                f"Robin matrix singular (eigenvalues {self.robin.eigenvalues})"
            )
        self.V = assemble_V(multi, params, n)
        self.disc = self.V.disc
        self.p = TracePair(*data(self.disc.points, self.disc.normals))
        self.extension = solve_trace(build_bordered(self.V), self.p)
        ext_idx = multi.exterior_indices()
        mask = np.concatenate([np.full(s.n, i in ext_idx) for i, s in enumerate(self.disc.samples)])
        p_e = TracePair(self.p.p0[mask], self.p.p1[mask])
        self.bracket = self.ext.bracket(p_e).values
        self.coeffs = np.linalg.solve(self.robin.matrix, self.bracket)
        dens = self.ext.G_extensions
        c = self.coeffs
        self.correction = DiscreteDensity(
            self.ext.disc,
            sum(ck * d.q0 for ck, d in zip(c, dens)),
            sum(ck * d.q1 for ck, d in zip(c, dens)),
            sum(ck * d.a for ck, d in zip(c, dens)),
            params,
        )

    def field(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        u = eval_field(self.extension, pts).u
        outside = ~self.multi.in_bounded_region(pts)
        if np.any(outside):
            po = pts[outside]
            u[outside] += G_vector(po, self.params) @ self.coeffs - eval_field(self.correction, po).u
        return u

    def trace_residual(self, t) -> float:
        """max |gamma(S^dagger p) - p| over parameters ``t`` on every curve."""
        t = np.asarray(t, dtype=float)
        ext_idx = self.multi.exterior_indices()
        worst = 0.0
        for c, curve in enumerate(self.multi.curves):
            tr = trace_at(self.extension, c, t)
            p0, p1 = tr.p0, tr.p1
            if c in ext_idx:
                target = sample_at(curve, t)
                G = G_vector(target.points, self.params) @ self.coeffs
                dG = np.einsum("pjc,pc->pj", grad_G_vector(target.points, self.params), target.normals) @ self.coeffs
                corr = trace_at(self.correction, ext_idx.index(c), t)
                p0 = p0 + G - corr.p0
                p1 = p1 + dG - corr.p1
            target = sample_at(curve, t)
            e0, e1 = self.data(target.points, target.normals)
            worst = max(worst, float(np.max(np.abs(p0 - e0))), float(np.max(np.abs(p1 - e1))))
        return worst

    def single_layer_density(self) -> DiscreteDensity:
        """Density of the plain single-layer solve V q = p."""
        return solve_V(self.V, self.p)


def sdagger_trace_residual(
    multi: MultiCurve,
    params: KernelParams,
    data: BoundaryData,
    n=256,
    n_check: int = 97,
) -> float:
    """Off-node trace mismatch of the reconstructed single-layer field."""
    t = 2 * np.pi * (np.arange(n_check) + 0.37) / n_check
    return SDagger(multi, params, data, n).trace_residual(t)
