"""Smooth closed curves and multi-connected unions of them.

Every built-in curve is parametrized counterclockwise over [0, 2pi) and the
unit normal points into the bounded region the curve encloses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .errors import GeometryError

KINDS = ("circle", "ellipse", "kite", "trig")

# dense sampling used for containment, disjointness and radii scans
DENSE_N = 4096


@dataclass(frozen=True)
class ParamCurve:
    """A smooth Jordan curve x(t), t in [0, 2pi).

    ``shape`` holds the length parameters of the curve family:

    * circle: ``(r,)``
    * ellipse: ``(a, b)``
    * kite: ``(scale,)``, x(t) = scale*(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)
    * trig: ``(r0, a1, b1, a2, b2, ...)``, star-shaped radial function
      r(t) = r0 + sum_k a_k cos kt + b_k sin kt
    """

    kind: str
    shape: tuple[float, ...]
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown curve kind {self.kind!r}")
        shape = tuple(float(v) for v in self.shape)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not all(math.isfinite(v) for v in shape + self.center):
            raise GeometryError("non-finite curve parameter")
        if self.kind == "circle":
            if len(shape) != 1 or shape[0] <= 0:
                raise GeometryError("circle needs a radius r > 0")
        elif self.kind == "ellipse":
            if len(shape) != 2 or min(shape) <= 0:
                raise GeometryError("ellipse needs semi-axes a > 0, b > 0")
        elif self.kind == "kite":
            if len(shape) != 1 or shape[0] <= 0:
                raise GeometryError("kite needs scale > 0")
        else:
            if len(shape) % 2 != 1 or shape[0] <= 0:
                raise GeometryError("trig curve needs (r0, a1, b1, ...) with r0 > 0")
            if shape[0] <= sum(abs(v) for v in shape[1:]):
                raise GeometryError("trig curve radial function must stay positive")

    # -- evaluation --------------------------------------------------------

    def derivatives(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return x(t), x'(t), x''(t), each of shape ``t.shape + (2,)``."""
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        if self.kind == "circle":
            (r,) = self.shape
            x = np.stack([r * c, r * s], axis=-1)
            dx = np.stack([-r * s, r * c], axis=-1)
            ddx = -x
        elif self.kind == "ellipse":
            a, b = self.shape
            x = np.stack([a * c, b * s], axis=-1)
            dx = np.stack([-a * s, b * c], axis=-1)
            ddx = -x
        elif self.kind == "kite":
            (k,) = self.shape
            c2, s2 = np.cos(2 * t), np.sin(2 * t)
            x = k * np.stack([c + 0.65 * c2 - 0.65, 1.5 * s], axis=-1)
            dx = k * np.stack([-s - 1.3 * s2, 1.5 * c], axis=-1)
            ddx = k * np.stack([-c - 2.6 * c2, -1.5 * s], axis=-1)
        else:
            r0, coeffs = self.shape[0], self.shape[1:]
            rad, drad, ddrad = np.full_like(t, r0), np.zeros_like(t), np.zeros_like(t)
            for k in range(1, len(coeffs) // 2 + 1):
                ak, bk = coeffs[2 * k - 2], coeffs[2 * k - 1]
                ck, sk = np.cos(k * t), np.sin(k * t)
                rad = rad + ak * ck + bk * sk
                drad = drad + k * (-ak * sk + bk * ck)
                ddrad = ddrad - k * k * (ak * ck + bk * sk)
            x = np.stack([rad * c, rad * s], axis=-1)
            dx = np.stack([drad * c - rad * s, drad * s + rad * c], axis=-1)
            ddx = np.stack(
                [ddrad * c - 2 * drad * s - rad * c, ddrad * s + 2 * drad * c - rad * s],
                axis=-1,
            )
        return x + np.asarray(self.center), dx, ddx

    def __call__(self, t):
        return self.derivatives(t)[0]

    # -- transformations ----------------------------------------------------

    def scaled(self, rho: float) -> "ParamCurve":
        """Image of the curve under x -> rho*x."""
        return ParamCurve(
            self.kind,
            tuple(rho * v for v in self.shape),
            (rho * self.center[0], rho * self.center[1]),
        )

    def translated(self, shift) -> "ParamCurve":
        return replace(self, center=(self.center[0] + shift[0], self.center[1] + shift[1]))

    def enclosed_area_centroid(self, n: int = DENSE_N) -> tuple[float, np.ndarray]:
        """Area and centroid of the enclosed region (Green's theorem, trapezoid)."""
        t = 2 * np.pi * np.arange(n) / n
        x, dx, _ = self.derivatives(t)
        h = 2 * np.pi / n
        area = 0.5 * h * np.sum(x[:, 0] * dx[:, 1] - x[:, 1] * dx[:, 0])
        cx = h * np.sum(0.5 * x[:, 0] ** 2 * dx[:, 1]) / area
        cy = -h * np.sum(0.5 * x[:, 1] ** 2 * dx[:, 0]) / area
        return area, np.array([cx, cy])


@dataclass(frozen=True)
class CurveSample:
    """Nodal data of one curve on the uniform grid t_i = 2 pi i / N."""

    t: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid arc-length weights."""
        return self.speed * (2 * np.pi / self.n)

    @property
    def spacing(self) -> float:
        """Largest arc-length distance between consecutive nodes."""
        return float(np.max(self.weights))


def sample(curve: ParamCurve, n: int) -> CurveSample:
    """Sample ``curve`` at ``n`` equispaced parameter values."""
    if n < 4 or n % 2:
        raise GeometryError(f"node count must be even and >= 4, got {n}")
    t = 2 * np.pi * np.arange(n) / n
    return sample_at(curve, t)


def sample_at(curve: ParamCurve, t) -> CurveSample:
    t = np.asarray(t, dtype=float)
    x, dx, ddx = curve.derivatives(t)
    speed = np.hypot(dx[..., 0], dx[..., 1])
    if np.any(speed <= 0) or not np.all(np.isfinite(speed)):
        raise GeometryError("degenerate parametrization: non-positive speed")
    normals = np.stack([-dx[..., 1], dx[..., 0]], axis=-1) / speed[..., None]
    curvature = (dx[..., 0] * ddx[..., 1] - dx[..., 1] * ddx[..., 0]) / speed**3
    return CurveSample(t, x, dx, speed, normals, curvature)


def winding_numbers(polygon: np.ndarray, points) -> np.ndarray:
    """Winding numbers of a closed polygon (rows = vertices) about many points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts), dtype=int)
    for i in range(0, len(pts), 64):
        d = polygon[None, :, :] - pts[i : i + 64, None, :]
        ang = np.arctan2(d[..., 1], d[..., 0])
        dang = np.diff(ang, axis=1, append=ang[:, :1])
        dang = (dang + np.pi) % (2 * np.pi) - np.pi
        out[i : i + 64] = np.rint(dang.sum(axis=1) / (2 * np.pi)).astype(int)
    return out


def winding_number(polygon: np.ndarray, point) -> int:
    """Winding number of a closed polygon (rows = vertices) about ``point``."""
    return int(winding_numbers(polygon, point)[0])


@dataclass(frozen=True)
class MultiCurve:
    """Disjoint union of Jordan curves with exterior-boundary flags.

    Build instances with :func:`make_multicurve`; the constructor itself does
    no checking.
    """

    curves: tuple[ParamCurve, ...]
    exterior: tuple[bool, ...]
    radii: tuple[float, float] = field(default=(math.nan, math.nan))

    @property
    def r_minus(self) -> float:
        return self.radii[0]

    @property
    def r_plus(self) -> float:
        return self.radii[1]

    def exterior_part(self) -> "MultiCurve":
        """The sub-union formed by the exterior boundary curves."""
        curves = tuple(c for c, e in zip(self.curves, self.exterior) if e)
        return MultiCurve(curves, (True,) * len(curves), self.radii)

    def exterior_indices(self) -> list[int]:
        return [i for i, e in enumerate(self.exterior) if e]

    def dense_polygons(self, n: int = DENSE_N) -> list[np.ndarray]:
        t = 2 * np.pi * np.arange(n) / n
        return [c(t) for c in self.curves]

    def in_bounded_region(self, points) -> np.ndarray:
        """True where a point is enclosed by at least one curve (Omega^-)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        polys = [p for p, e in zip(self.dense_polygons(), self.exterior) if e]
        inside = np.zeros(len(pts), dtype=bool)
        for poly in polys:
            inside |= winding_numbers(poly, pts) != 0
        return inside


def _min_pair_distance(a: np.ndarray, b: np.ndarray) -> float:
    dist, _ = cKDTree(b).query(a, k=1)
    return float(dist.min())


def classify_exterior(curves: Sequence[ParamCurve], n: int = DENSE_N) -> tuple[bool, ...]:
    """Flag the curves that are not enclosed by any other curve.

    Raises :class:`GeometryError` when curves intersect or touch, or when a
    containment test point lies on another curve.
    """
    curves = tuple(curves)
    t = 2 * np.pi * np.arange(n) / n
    polys = [c(t) for c in curves]
    scale = max(float(np.max(np.linalg.norm(p, axis=1))) for p in polys)
    scale = max(scale, max(float(np.ptp(p, axis=0).max()) for p in polys))
    tol = 1e-9 * scale
    flags = []
    for i, pi in enumerate(polys):
        enclosed = False
        for j, pj in enumerate(polys):
            if i == j:
                continue
            if j > i and _min_pair_distance(pi, pj) <= tol:
                raise GeometryError(f"curves {i} and {j} intersect or touch")
            probe = pi[0]
            if np.min(np.linalg.norm(pj - probe, axis=1)) <= tol:
                raise GeometryError(f"ambiguous containment of curve {i} in curve {j}")
            # a curve partly inside and partly outside another one crosses it
            wind = winding_numbers(pj, pi[:: max(1, len(pi) // 256)])
            if np.any(wind != wind[0]):
                raise GeometryError(f"curves {i} and {j} intersect")
            if wind[0] != 0:
                enclosed = True
        flags.append(not enclosed)
    return tuple(flags)


def _radial_extreme(curve: ParamCurve, n: int, largest: bool) -> float:
    """Extreme of |x(t)| over one curve: dense scan then local refinement."""
    t = 2 * np.pi * np.arange(n) / n
    r = np.linalg.norm(curve(t), axis=1)
    i = int(np.argmax(r) if largest else np.argmin(r))
    sign = -1.0 if largest else 1.0
    h = 2 * np.pi / n
    res = minimize_scalar(
        lambda s: sign * float(np.linalg.norm(curve(np.array(s)))),
        bounds=(t[i] - h, t[i] + h),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return max(r[i], -res.fun) if largest else min(r[i], res.fun)


def bounding_radii(multi: MultiCurve, n: int = DENSE_N) -> tuple[float, float]:
    """Radii (R-, R+) of origin-centred circles inside / around the curves.

    R+ is the largest distance from the origin to the curves; R- is the
    radius of the largest origin-centred disk contained in the closure of
    Omega^-, i.e. the distance from the origin to the exterior boundary.
    """
    if not multi.in_bounded_region([[0.0, 0.0]])[0]:
        raise GeometryError("origin is not inside the bounded region")
    r_plus = max(_radial_extreme(c, n, True) for c in multi.curves)
    r_minus = min(
        _radial_extreme(c, n, False) for c, e in zip(multi.curves, multi.exterior) if e
    )
    if r_minus <= 0:
        raise GeometryError("origin lies on a curve")
    return r_minus, r_plus


def make_multicurve(curves: Sequence[ParamCurve], normalize: bool = True) -> MultiCurve:
    """Validate a list of curves and return the classified union.

    With ``normalize`` the union is translated so that the centroid of the
    region enclosed by the first exterior curve sits at the origin.
    """
    curves = tuple(curves)
    if not curves:
        raise GeometryError("empty curve set")
    flags = classify_exterior(curves)
    if normalize:
        first = curves[flags.index(True)]
        _, centroid = first.enclosed_area_centroid()
        shift = -centroid
        # exact zeros for already-centred input keep closed forms bit-clean
        shift[np.abs(shift) < 1e-14 * max(1.0, np.abs(centroid).max())] = 0.0
        if np.any(shift != 0):
            curves = tuple(c.translated(shift) for c in curves)
    multi = MultiCurve(curves, flags)
    return replace(multi, radii=bounding_radii(multi))


def scale_about_origin(multi: MultiCurve, rho: float) -> MultiCurve:
    """Image of the union under x -> rho*x (normals keep their direction)."""
    if not rho > 0:
        raise GeometryError("scale factor must be positive")
    curves = tuple(c.scaled(rho) for c in multi.curves)
    return MultiCurve(curves, multi.exterior, (rho * multi.radii[0], rho * multi.radii[1]))


def translate(multi: MultiCurve, shift) -> MultiCurve:
    """Translate without re-normalising; radii are recomputed about the origin."""
    curves = tuple(c.translated(shift) for c in multi.curves)
    moved = MultiCurve(curves, multi.exterior)
    return replace(moved, radii=bounding_radii(moved))


# -- curve-spec mini language ----------------------------------------------

_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:e[-+]?\d+)?"
_ALLOWED = {
    "circle": ({"r"}, {"cx", "cy"}),
    "ellipse": ({"a", "b"}, {"cx", "cy"}),
    "kite": (set(), {"scale", "cx", "cy"}),
}


def parse_curve_spec(spec: str) -> list[ParamCurve]:
    """Parse ``circle:r=1,cx=0.2+ellipse:a=2,b=1+kite:scale=0.5``.

    Parsing is case-insensitive; any malformed item raises GeometryError.
    """
    text = spec.strip().lower().replace(" ", "")
    if not text:
        raise GeometryError("empty curve spec")
    curves = []
    for item in text.split("+"):
        kind, _, args = item.partition(":")
        if kind not in _ALLOWED:
            raise GeometryError(f"unknown curve kind {kind!r} in {item!r}")
        required, optional = _ALLOWED[kind]
        values: dict[str, float] = {}
        for kv in filter(None, args.split(",")):
            key, eq, val = kv.partition("=")
            if not eq or not re.fullmatch(_FLOAT, val):
                raise GeometryError(f"malformed parameter {kv!r} in {item!r}")
            if key not in required | optional or key in values:
                raise GeometryError(f"unexpected parameter {key!r} in {item!r}")
            values[key] = float(val)
        missing = required - values.keys()
        if missing:
            raise GeometryError(f"missing {sorted(missing)} in {item!r}")
        center = (values.get("cx", 0.0), values.get("cy", 0.0))
        if kind == "circle":
            shape = (values["r"],)
        elif kind == "ellipse":
            shape = (values["a"], values["b"])
        else:
            shape = (values.get("scale", 1.0),)
        curves.append(ParamCurve(kind, shape, center))
    return curves


def multicurve_from_spec(spec: str, normalize: bool = True) -> MultiCurve:
    return make_multicurve(parse_curve_spec(spec), normalize=normalize)
