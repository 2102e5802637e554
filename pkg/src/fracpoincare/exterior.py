"""Exterior kernel weight kappa(x) = integral of |x-y|^(-n-sp) over the
complement of the domain.

kappa is the per-point penalty that encodes the zero exterior condition
of the Dirichlet-type energy.  For an interval it is elementary; for a
box in R^2 the complement is split into four half-planes minus the four
double-counted corner quadrants, each of which reduces to incomplete
beta functions.  A slower 3^n - 1 region decomposition with iterated
adaptive quadrature is kept as an independent cross-check oracle.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from scipy import integrate
from scipy.special import betainc

from .domain import DomainSpec, Grid
from .special import beta as beta_fn

__all__ = [
    "exterior_kernel_weight",
    "exterior_kernel_weight_quadrature",
    "exterior_weights_grid",
]


def _check_params(s: float, p: float) -> float:
    sp = float(s) * float(p)
    if not sp > 0.0:
        raise ValueError(f"need s*p > 0, got {sp}")
    return sp


def _distances(x, domain: DomainSpec) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != domain.dim:
        raise ValueError(f"point has {x.shape[0]} coordinates for a {domain.dim}-d domain")
    lo = np.array([a for a, _ in domain.factors])
    hi = np.array([b for _, b in domain.factors])
    dlo = x - lo
    dhi = hi - x
    if np.any(dlo <= 0.0) or np.any(dhi <= 0.0):
        raise ValueError(f"point {x.tolist()} is not strictly inside the open domain")
    return dlo, dhi


def _half_plane(d, q: float) -> np.ndarray:
    """Integral of |t|^(-q) over the half-plane {t1 > d} in R^2."""
    bfull = beta_fn(0.5, 0.5 * (q - 1.0))
    return bfull * np.asarray(d, dtype=np.float64) ** (2.0 - q) / (q - 2.0)


def _tail_T(w, q: float) -> np.ndarray:
    """T(w) = int_w^inf (1+v^2)^(-q/2) dv for w >= 0, via incomplete beta."""
    w = np.asarray(w, dtype=np.float64)
    a = 0.5 * (q - 1.0)
    return 0.5 * beta_fn(a, 0.5) * betainc(a, 0.5, 1.0 / (1.0 + w * w))


def _sin_power(phi, q: float) -> np.ndarray:
    """int_0^phi sin(theta)^(q-2) dtheta for phi in [0, pi/2]."""
    phi = np.asarray(phi, dtype=np.float64)
    a = 0.5 * (q - 1.0)
    return 0.5 * beta_fn(a, 0.5) * betainc(a, 0.5, np.sin(phi) ** 2)


def _corner(d1, d2, q: float) -> np.ndarray:
    """Integral of |t|^(-q) over the quadrant {t1 > d1, t2 > d2} in R^2.

    Derivation: substitute u = d2/t1 in the iterated integral and
    integrate by parts, which leaves one tail term plus one incomplete
    sin-power integral.  Symmetric in (d1, d2).
    """
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    w = d2 / d1
    val = d2 ** (2.0 - q) / (q - 2.0) * (w ** (q - 2.0) * _tail_T(w, q) + _sin_power(np.arctan(w), q))
    return val


def exterior_kernel_weight(x, domain: DomainSpec, s: float, p: float) -> float:
    """kappa(x) for x strictly inside the open domain.

    1D intervals are closed form; 2D boxes use the half-plane/corner
    decomposition (also closed form, via incomplete beta); higher
    dimensions fall back to the region-decomposition quadrature.
    """
    sp = _check_params(s, p)
    dlo, dhi = _distances(x, domain)
    n = domain.dim
    if n == 1:
        return float((dlo[0] ** (-sp) + dhi[0] ** (-sp)) / sp)
    if n == 2:
        q = n + sp
        halves = _half_plane(np.array([dlo[0], dhi[0], dlo[1], dhi[1]]), q).sum()
        corners = (
            _corner(dlo[0], dlo[1], q)
            + _corner(dlo[0], dhi[1], q)
            + _corner(dhi[0], dlo[1], q)
            + _corner(dhi[0], dhi[1], q)
        )
        return float(halves - corners)
    return exterior_kernel_weight_quadrature(x, domain, s, p)


def exterior_weights_grid(grid: Grid, s: float, p: float) -> np.ndarray:
    """kappa at every grid node, vectorized; lattice-shaped array."""
    sp = _check_params(s, p)
    n = grid.dim
    if n == 1:
        (a, b), = grid.domain.factors
        x = grid.axes[0]
        return ((x - a) ** (-sp) + (b - x) ** (-sp)) / sp
    if n == 2:
        q = n + sp
        (a1, b1), (a2, b2) = grid.domain.factors
        d1lo = (grid.axes[0] - a1)[:, None]
        d1hi = (b1 - grid.axes[0])[:, None]
        d2lo = (grid.axes[1] - a2)[None, :]
        d2hi = (b2 - grid.axes[1])[None, :]
        out = (
            _half_plane(d1lo, q) + _half_plane(d1hi, q)
            + _half_plane(d2lo, q) + _half_plane(d2hi, q)
        )
        out = out - (
            _corner(d1lo, d2lo, q) + _corner(d1lo, d2hi, q)
            + _corner(d1hi, d2lo, q) + _corner(d1hi, d2hi, q)
        )
        return out
    nodes = grid.nodes()
    vals = np.array([exterior_kernel_weight(pt, grid.domain, s, p) for pt in nodes])
    return vals.reshape(grid.shape)


def exterior_kernel_weight_quadrature(
    x, domain: DomainSpec, s: float, p: float, epsrel: float = 1e-10
) -> float:
    """Oracle for kappa(x): decompose the complement into the 3^n - 1
    axis-aligned regions around the box and integrate each by iterated
    adaptive quadrature (raw kernel only, no special functions).

    Practical for n <= 3; used by the tests to certify the closed-form
    path to 1e-8 relative accuracy.
    """
    sp = _check_params(s, p)
    _distances(x, domain)  # validates strict interiority
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = domain.dim
    q = n + sp

    def region_integral(sides) -> float:
        # sides[i] in {-1, 0, +1}: below / inside / above along axis i.
        # Iterated integration, innermost axis first, all relative to x.
        limits = []
        for ax, side in enumerate(sides):
            a, b = domain.factors[ax]
            if side == -1:
                limits.append((-math.inf, a - x[ax]))
            elif side == 0:
                limits.append((a - x[ax], b - x[ax]))
            else:
                limits.append((b - x[ax], math.inf))

        def integrand(*t):
            r2 = sum(v * v for v in t)
            return r2 ** (-0.5 * q)

        if n == 1:
            val, _ = integrate.quad(integrand, *limits[0], epsrel=epsrel, epsabs=0.0)
            return val
        if n == 2:
            def outer(t0):
                val, _ = integrate.quad(
                    lambda t1: integrand(t0, t1), *limits[1], epsrel=epsrel, epsabs=0.0
                )
                return val
            val, _ = integrate.quad(outer, *limits[0], epsrel=epsrel, epsabs=0.0)
            return val
        if n == 3:
            def mid(t0, t1):
                val, _ = integrate.quad(
                    lambda t2: integrand(t0, t1, t2), *limits[2],
                    epsrel=epsrel, epsabs=0.0,
                )
                return val
            def outer3(t0):
                val, _ = integrate.quad(
                    lambda t1: mid(t0, t1), *limits[1], epsrel=epsrel, epsabs=0.0
                )
                return val
            val, _ = integrate.quad(outer3, *limits[0], epsrel=epsrel, epsabs=0.0)
            return val
        raise NotImplementedError(f"quadrature oracle not implemented for n = {n}")

    total = 0.0
    for flat in range(3 ** n):
        sides = []
        rem = flat
        for _ in range(n):
            sides.append(rem % 3 - 1)
            rem //= 3
        if all(sd == 0 for sd in sides):
            continue
        total += region_integral(sides)
    return total
