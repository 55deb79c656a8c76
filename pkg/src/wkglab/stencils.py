"""Second-order finite differences on a uniform radial grid.

Radial fields are smooth functions of |x|, hence even in r; their
r-derivatives are odd. ``parity`` selects the ghost-node reflection at r = 0.
Outer edges use one-sided second-order stencils.
"""

from __future__ import annotations

import numpy as np


def _at_origin(r: np.ndarray) -> bool:
    return r[0] == 0.0


def d1(f: np.ndarray, dr: float, *, origin: bool = True, parity: int = 1) -> np.ndarray:
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dr)
    if origin:
        out[0] = (f[1] - parity * f[1]) / (2 * dr)
    else:
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dr)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dr)
    return out


def d2(f: np.ndarray, dr: float, *, origin: bool = True, parity: int = 1) -> np.ndarray:
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / dr**2
    if origin:
        out[0] = (f[1] * (1 + parity) - 2 * f[0]) / dr**2
    else:
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / dr**2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / dr**2
    return out


def radial_laplacian(f: np.ndarray, r: np.ndarray, dr: float) -> np.ndarray:
    """∂_r² f + (2/r) ∂_r f for an even field; 3 ∂_r² f at the origin."""
    origin = _at_origin(r)
    lap = d2(f, dr, origin=origin)
    first = d1(f, dr, origin=origin)
    if origin:
        lap[1:] += 2 * first[1:] / r[1:]
        lap[0] *= 3
    else:
        lap += 2 * first / r
    return lap


def inverse_r_times(g: np.ndarray, dg: np.ndarray, r: np.ndarray) -> np.ndarray:
    """g / r for an odd g that vanishes at the origin; uses g'(0) there."""
    out = np.empty_like(g)
    if _at_origin(r):
        out[1:] = g[1:] / r[1:]
        out[0] = dg[0]
    else:
        out[:] = g / r
    return out


def ko_dissipation(f: np.ndarray, dr: float, *, origin: bool = True, parity: int = 1) -> np.ndarray:
    """Kreiss-Oliger fourth-difference operator -(δ⁴ f)/(16 dr); zero on the last two nodes."""
    n = f.size
    ext = np.empty(n + 2)
    ext[2:] = f
    if origin:
        ext[0] = parity * f[2]
        ext[1] = parity * f[1]
    else:
        ext[0] = 3 * f[0] - 3 * f[1] + f[2]
        ext[1] = 2 * f[0] - f[1]
    out = np.zeros_like(f)
    c = ext[2:n]
    out[: n - 2] = -(ext[0:n - 2] - 4 * ext[1:n - 1] + 6 * c - 4 * ext[3:n + 1] + ext[4:n + 2]) / (16 * dr)
    return out


def trapezoid_radial(integrand: np.ndarray, r: np.ndarray) -> float:
    """∫ integrand · 4π r² dr by the trapezoidal rule."""
    return float(np.trapezoid(integrand * 4 * np.pi * r**2, r))
