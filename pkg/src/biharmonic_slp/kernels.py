"""Biharmonic fundamental solution, its derivatives and circle constants.

All point arguments are arrays whose last axis has length 2; kernels are
vectorised over the leading axes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SingularEvaluationError

EIGHT_PI = 8.0 * math.pi
TWO_PI = 2.0 * math.pi


class SingularPointWarning(UserWarning):
    """G0 was evaluated at the origin, where it is finite but not smooth."""


@dataclass(frozen=True)
class KernelParams:
    """Normalisation (kappa0, kappa1) of G0(x) = (|x|^2 ln(|x|/kappa0) + kappa1)/(8 pi)."""

    kappa0: float = 1.0
    kappa1: float = 0.0

    def __post_init__(self):
        if not (self.kappa0 > 0 and math.isfinite(self.kappa0)):
            raise ValueError(f"kappa0 must be positive and finite, got {self.kappa0}")
        if not math.isfinite(self.kappa1):
            raise ValueError("kappa1 must be finite")


DEFAULT_PARAMS = KernelParams()


def _radius(x):
    x = np.asarray(x, dtype=float)
    return x, np.hypot(x[..., 0], x[..., 1])


def _check_nonzero(r, what):
    if np.any(r == 0):
        raise SingularEvaluationError(f"{what} evaluated at the origin")


def G0(x, params: KernelParams = DEFAULT_PARAMS):
    """Fundamental solution of the bilaplacian.

    At x = 0 the finite limit kappa1/(8 pi) is returned and a
    :class:`SingularPointWarning` is emitted, since derivatives blow up there.
    """
    x, r = _radius(x)
    zero = r == 0
    if np.any(zero):
        warnings.warn("G0 evaluated at the origin", SingularPointWarning, stacklevel=2)
    rs = np.where(zero, 1.0, r)
    val = rs**2 * np.log(rs / params.kappa0)
    val = np.where(zero, 0.0, val)
    out = (val + params.kappa1) / EIGHT_PI
    return out[()] if out.ndim == 0 else out


def Gj(x, j: int, params: KernelParams = DEFAULT_PARAMS):
    """G_j = -dG0/dx_j for j = 1, 2 (G_0 is returned for j = 0)."""
    if j == 0:
        return G0(x, params)
    x, r = _radius(x)
    _check_nonzero(r, f"G{j}")
    out = -x[..., j - 1] * (2 * np.log(r / params.kappa0) + 1) / EIGHT_PI
    return out[()] if out.ndim == 0 else out


def omega(x, j: int, params: KernelParams = DEFAULT_PARAMS):
    """Laplacian of G_j: (ln(|x|/kappa0) + 1)/(2 pi) or -x_j/(2 pi |x|^2)."""
    x, r = _radius(x)
    _check_nonzero(r, f"omega{j}")
    if j == 0:
        out = (np.log(r / params.kappa0) + 1) / TWO_PI
    else:
        out = -x[..., j - 1] / (TWO_PI * r**2)
    return out[()] if out.ndim == 0 else out


def G_vector(x, params: KernelParams = DEFAULT_PARAMS) -> np.ndarray:
    """Stack (G0, G1, G2) along a new last axis."""
    return np.stack([np.asarray(Gj(x, j, params)) for j in range(3)], axis=-1)


def omega_vector(x, params: KernelParams = DEFAULT_PARAMS) -> np.ndarray:
    return np.stack([np.asarray(omega(x, j, params)) for j in range(3)], axis=-1)


def grad_G_vector(x, params: KernelParams = DEFAULT_PARAMS) -> np.ndarray:
    """Gradients of (G0, G1, G2); shape ``x.shape[:-1] + (3, 2)``."""
    x, r = _radius(x)
    _check_nonzero(r, "grad G")
    lam = 2 * np.log(r / params.kappa0) + 1
    out = np.empty(x.shape[:-1] + (3, 2))
    out[..., 0, :] = x * (lam / EIGHT_PI)[..., None]
    for j in (1, 2):
        for i in (1, 2):
            out[..., j, i - 1] = -((i == j) * lam + 2 * x[..., i - 1] * x[..., j - 1] / r**2) / EIGHT_PI
    return out


def grad_omega_vector(x, params: KernelParams = DEFAULT_PARAMS) -> np.ndarray:
    """Gradients of (omega0, omega1, omega2); shape ``x.shape[:-1] + (3, 2)``."""
    x, r = _radius(x)
    _check_nonzero(r, "grad omega")
    r2 = r**2
    out = np.empty(x.shape[:-1] + (3, 2))
    out[..., 0, :] = x / (TWO_PI * r2)[..., None]
    for j in (1, 2):
        for i in (1, 2):
            out[..., j, i - 1] = -((i == j) / r2 - 2 * x[..., i - 1] * x[..., j - 1] / r2**2) / TWO_PI
    return out


def affine_basis(x) -> np.ndarray:
    """X(x) = (1, x1, x2) along a new last axis."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([np.ones(x.shape[:-1] + (1,)), x], axis=-1)


def affine_normal_derivative(n) -> np.ndarray:
    """d_n X = (0, n1, n2)."""
    n = np.asarray(n, dtype=float)
    return np.concatenate([np.zeros(n.shape[:-1] + (1,)), n], axis=-1)


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def trace_kernels(x, y, nx, ny, params: KernelParams = DEFAULT_PARAMS) -> np.ndarray:
    """Kernel block [[K_D0, K_D1], [K_N0, K_N1]] for distinct points x, y.

    Rows: Dirichlet / Neumann trace at x; columns: density q0 / q1 at y.
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise SingularEvaluationError("coincident points; use split_trace_kernels")
    L = np.log(r / params.kappa0)
    lam = 2 * L + 1
    nxd, nyd = _dot(nx, d), _dot(ny, d)
    out = np.empty(d.shape[:-1] + (2, 2))
    out[..., 0, 0] = (r**2 * L + params.kappa1) / EIGHT_PI
    out[..., 0, 1] = -nyd * lam / EIGHT_PI
    out[..., 1, 0] = nxd * lam / EIGHT_PI
    out[..., 1, 1] = -(lam * _dot(nx, ny) + 2 * nxd * nyd / r**2) / EIGHT_PI
    return out


def split_trace_kernels(x, y, nx, ny, tau, speed, params: KernelParams = DEFAULT_PARAMS):
    """Log-factored form of :func:`trace_kernels` for two points on one curve.

    Returns ``(A, B)`` with kernel = A * log(4 sin^2(tau/2)) + B, where
    tau = t - s is the parameter difference and A, B are smooth periodic
    functions of (t, s).  Where tau = 0 (mod 2 pi) the diagonal limits are
    used; they need the curve speed |x'(t)| given in ``speed``.
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    nx = np.asarray(nx, dtype=float)
    ny = np.asarray(ny, dtype=float)
    tau = np.asarray(tau, dtype=float)
    speed = np.broadcast_to(np.asarray(speed, dtype=float), tau.shape)
    sin2 = np.sin(0.5 * tau) ** 2
    diag = sin2 < 1e-300
    r2 = _dot(d, d)
    r2s = np.where(diag, 1.0, r2)
    # smooth remainder ln(r^2 / (4 sin^2(tau/2))) -> ln |x'|^2 on the diagonal
    rem = np.where(diag, 2 * np.log(speed), np.log(r2s) - np.log(4 * np.where(diag, 1.0, sin2)))
    smooth_log = 0.5 * rem - math.log(params.kappa0)  # = ln(r/kappa0) - log-part/2
    nxd, nyd = _dot(nx, d), _dot(ny, d)
    nxny = _dot(nx, ny)

    # each kernel is f1 * ln(r/kappa0) + f2 with f1, f2 smooth
    f1 = np.empty(d.shape[:-1] + (2, 2))
    f2 = np.empty_like(f1)
    f1[..., 0, 0] = r2 / EIGHT_PI
    f2[..., 0, 0] = params.kappa1 / EIGHT_PI
    f1[..., 0, 1] = -2 * nyd / EIGHT_PI
    f2[..., 0, 1] = -nyd / EIGHT_PI
    f1[..., 1, 0] = 2 * nxd / EIGHT_PI
    f2[..., 1, 0] = nxd / EIGHT_PI
    f1[..., 1, 1] = -2 * nxny / EIGHT_PI
    f2[..., 1, 1] = -(nxny + np.where(diag, 0.0, 2 * nxd * nyd / r2s)) / EIGHT_PI

    A = 0.5 * f1
    B = f1 * smooth_log[..., None, None] + f2
    return A, B


class FieldKernels(NamedTuple):
    """Kernels mapping (q0, q1) at y to (u, grad u, lap u, grad lap u) at x."""

    u: np.ndarray  # (..., 2)
    grad: np.ndarray  # (..., 2, 2): [density, component]
    lap: np.ndarray  # (..., 2)
    grad_lap: np.ndarray  # (..., 2, 2)


def field_kernels(d, ny, params: KernelParams = DEFAULT_PARAMS) -> FieldKernels:
    """Field kernels for the single-layer potential at offsets d = x - y."""
    d = np.asarray(d, dtype=float)
    ny = np.asarray(ny, dtype=float)
    r2 = _dot(d, d)
    if np.any(r2 == 0):
        raise SingularEvaluationError("field evaluated on a source node")
    L = 0.5 * np.log(r2) - math.log(params.kappa0)
    lam = 2 * L + 1
    nyd = _dot(ny, d)

    u = np.empty(d.shape[:-1] + (2,))
    u[..., 0] = (r2 * L + params.kappa1) / EIGHT_PI
    u[..., 1] = -nyd * lam / EIGHT_PI

    grad = np.empty(d.shape[:-1] + (2, 2))
    grad[..., 0, :] = d * (lam / EIGHT_PI)[..., None]
    # -Hess(G0) n_y, Hess(G0) = (lam I + 2 d d^T / r^2) / (8 pi)
    grad[..., 1, :] = -(lam[..., None] * ny + (2 * nyd / r2)[..., None] * d) / EIGHT_PI

    lap = np.empty(d.shape[:-1] + (2,))
    lap[..., 0] = (L + 1) / TWO_PI
    lap[..., 1] = -nyd / (TWO_PI * r2)

    grad_lap = np.empty(d.shape[:-1] + (2, 2))
    grad_lap[..., 0, :] = d / (TWO_PI * r2)[..., None]
    grad_lap[..., 1, :] = -(ny / r2[..., None] - (2 * nyd / r2**2)[..., None] * d) / TWO_PI
    return FieldKernels(u, grad, lap, grad_lap)


class CircleConstants(NamedTuple):
    nu: tuple[float, float, float]
    lam: tuple[float, float, float]


def circle_closed_forms(R: float, params: KernelParams = DEFAULT_PARAMS) -> CircleConstants:
    """Constants nu_k(R), lambda_k(R) of an origin-centred circle of radius R.

    On the circle the total trace of G_k coincides with that of
    nu_k*omega_k + lambda_k*X_k, and the Robin matrix of the circle is
    diag(lambda_0, lambda_1, lambda_2).
    """
    if not R > 0:
        raise ValueError("radius must be positive")
    L = math.log(R / params.kappa0)
    nu0 = R**2 / 4 * (2 * L + 1)
    nuj = -(R**2) / 4
    lam0 = -(R**2) / (4 * math.pi) * (L + L**2) + (params.kappa1 - R**2) / EIGHT_PI
    lamj = -(L + 1) / (4 * math.pi)
    return CircleConstants((nu0, nuj, nuj), (lam0, lamj, lamj))
