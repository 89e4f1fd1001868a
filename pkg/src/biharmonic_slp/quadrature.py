"""Periodic quadrature on uniform grids.

The product rule for the factor log(4 sin^2((t - s)/2)) integrates every
trigonometric polynomial of degree < N/2 exactly, using the expansion
log(4 sin^2(u/2)) = -2 sum_{m>=1} cos(m u)/m.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate


def nodes(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def trapezoid_integrate(samples) -> float:
    """(2 pi / N) * sum of periodic samples."""
    samples = np.asarray(samples, dtype=float)
    return float(2 * np.pi * samples.sum(axis=-1) / samples.shape[-1])


def log_weights(n: int, s) -> np.ndarray:
    """Product-rule weights R_i(s) for the nodes t_i = 2 pi i / n.

    ``s`` may be a scalar or an array of target parameters (not necessarily
    grid nodes); the result has shape ``np.shape(s) + (n,)``.
    """
    if n % 2:
        raise ValueError("node count must be even")
    s = np.asarray(s, dtype=float)
    half = n // 2
    m = np.arange(1, half)
    u = s[..., None] - nodes(n)
    out = np.empty(u.shape)
    flat_u = u.reshape(-1, n)
    flat = out.reshape(-1, n)
    # chunk targets to bound memory at large n
    step = max(1, 2**22 // (n * max(1, half)))
    for i in range(0, len(flat_u), step):
        uu = flat_u[i : i + step]
        acc = np.cos(uu[..., None] * m) @ (1.0 / m)
        flat[i : i + step] = -(4 * np.pi / n) * acc - (4 * np.pi / n**2) * np.cos(half * uu)
    return out


def circulant_log_weights(n: int) -> np.ndarray:
    """R_0(t_k), k = 0..n-1; on the grid R_j(t_i) = c[(i - j) mod n]."""
    half = n // 2
    spec = np.zeros(n)
    m = np.arange(1, half)
    spec[m] = -(2 * np.pi / n) / m
    spec[n - m] = spec[m]
    spec[half] = -(4 * np.pi / n**2)
    # c_k = sum over the symmetric spectrum of cos(2 pi m k / n)
    return np.real(np.fft.fft(spec))


def log_weight_matrix(n: int) -> np.ndarray:
    c = circulant_log_weights(n)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return c[idx]


def log_product_integrate(A_samples, B_samples, s) -> float:
    """Approximate int A(t) log(4 sin^2((t - s)/2)) dt + int B(t) dt over a period.

    ``s`` is a target parameter; an integer is read as the node index.
    """
    A = np.asarray(A_samples, dtype=float)
    B = np.asarray(B_samples, dtype=float)
    n = A.shape[-1]
    if isinstance(s, (int, np.integer)):
        s = 2 * np.pi * s / n
    R = log_weights(n, s)
    return float(R @ A + trapezoid_integrate(B))


def adaptive_integrate(f, a: float = 0.0, b: float = 2 * math.pi, breakpoints=(), tol: float = 1e-13) -> float:
    """Adaptive reference quadrature (QUADPACK) used as a test oracle.

    Integrable endpoint singularities are handled by splitting at
    ``breakpoints`` so each one lands on a subinterval endpoint.
    """
    cuts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    total = 0.0
    with warnings.catch_warnings():
        # tolerances sit near machine precision; QUADPACK then warns spuriously
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, _ = integrate.quad(f, lo, hi, epsabs=tol, epsrel=1e-14, limit=500)
            total += val
    return total
