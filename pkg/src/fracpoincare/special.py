"""Gamma/beta machinery and the kernel normalization constants.

The nonlocal energies in this package carry the normalization constant

    C(n, s, p) = s*p * 2**(2*s-1) * G((n+s*p)/2)
                 / (2 * pi**((n-1)/2) * G(1-s) * G((p+1)/2)),

with G the gamma function.  This is the choice for which the dimension
reduction identity C(n,s,p) * reduction_constant(m,n,s,p) = C(n-m,s,p)
holds with constant exactly one, and for which the angular prefactor of
the strip lower bound collapses to 1 (see ``cos_power_integral``).

Everything here is a pure function of a handful of scalars; the two
constants that sit inside O(N^2) assembly loops are memoized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

__all__ = [
    "FracParams",
    "gamma",
    "log_gamma",
    "beta",
    "sphere_area",
    "kernel_constant",
    "reduction_constant",
    "surface_element",
    "cos_power_integral",
]


# 13-term rational Lanczos approximation for double precision,
# g = 6.024680040776729583740234375.  Coefficient set "lanczos13m53"
# from Boost.Math (Pugh-style optimization); experimental peak relative
# error ~9.2e-17 on the positive real axis, comfortably below the
# 1e-13 contract of `gamma`.  Index k holds the z**k coefficient.
_LANCZOS_G = 6.024680040776729583740234375

_LANCZOS_NUM = (
    23531376880.410759688572007674451636754734846804940,
    42919803642.649098768957899047001988850926355848959,
    35711959237.355668049440185451547166705960488635843,
    17921034426.037209699919755754458931112671403265390,
    6039542586.3520280050642916443072979210699388420708,
    1439720407.3117216736632230727949123939715485786772,
    248874557.86205415651146038641322942321632125127801,
    31426415.585400194380614231628318205362874684987640,
    2876370.6289353724412254090516208496135991145378768,
    186056.26539522349504029498971604569928220784236328,
    8071.6720023658162106380029022722506138218516325024,
    210.82427775157934587250973392071336271166969580291,
    2.5066282746310002701649081771338373386264310793408,
)

_LANCZOS_DEN = (
    0.0,
    39916800.0,
    120543840.0,
    150917976.0,
    105258076.0,
    45995730.0,
    13339535.0,
    2637558.0,
    357423.0,
    32670.0,
    1925.0,
    66.0,
    1.0,
)


def _lanczos_sum(x: float) -> float:
    # Rational evaluation; switch to Horner in 1/x above 1 so neither
    # polynomial overflows for large arguments.
    if x <= 1.0:
        num = 0.0
        den = 0.0
        for k in range(12, -1, -1):
            num = num * x + _LANCZOS_NUM[k]
            den = den * x + _LANCZOS_DEN[k]
    else:
        t = 1.0 / x
        num = 0.0
        den = 0.0
        for k in range(13):
            num = num * t + _LANCZOS_NUM[k]
            den = den * t + _LANCZOS_DEN[k]
    return num / den


def gamma(x: float) -> float:
    """Gamma function on the positive real axis.

    Relative error is below 1e-13 on [0.05, 50] (validated against
    mpmath in the test suite).  Negative-axis continuation is out of
    scope; nonpositive input raises ValueError.
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"gamma requires x > 0, got {x}")
    if x != x or math.isinf(x):
        raise ValueError(f"gamma requires a finite argument, got {x}")
    # For x < 0.5 use the recurrence G(x) = G(x+1)/x once; the Lanczos
    # rational form is tuned for arguments >= 0.5.
    if x < 0.5:
        return gamma(x + 1.0) / x
    zgh = x + _LANCZOS_G - 0.5
    s = _lanczos_sum(x)
    # Split the power to avoid premature overflow for x up to ~170.
    if x > 140.0:
        half = math.pow(zgh, 0.5 * (x - 0.5))
        return s * half * (half / math.exp(zgh))
    return s * math.pow(zgh, x - 0.5) * math.exp(-zgh)


def log_gamma(x: float) -> float:
    """log of `gamma` for x > 0, same coefficient set."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    if x < 0.5:
        return log_gamma(x + 1.0) - math.log(x)
    zgh = x + _LANCZOS_G - 0.5
    return math.log(_lanczos_sum(x)) + (x - 0.5) * math.log(zgh) - zgh


def beta(x: float, y: float) -> float:
    """Beta function B(x, y) = G(x)G(y)/G(x+y) for x, y > 0."""
    x = float(x)
    y = float(y)
    if not (x > 0.0 and y > 0.0):
        raise ValueError(f"beta requires positive arguments, got ({x}, {y})")
    return math.exp(log_gamma(x) + log_gamma(y) - log_gamma(x + y))


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^{k-1} in R^k.

    sphere_area(1) = 2 (two points), sphere_area(2) = 2*pi,
    sphere_area(3) = 4*pi.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"sphere_area requires an integer k >= 1, got {k}")
    k = int(k)
    return 2.0 * math.pi ** (0.5 * k) / gamma(0.5 * k)


@dataclass(frozen=True)
class FracParams:
    """Validated (n, s, p) parameter bundle, optionally with the
    free-direction count m of a cylinder splitting R^n = R^m x R^(n-m)."""

    n: int
    s: float
    p: float
    m: Optional[int] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.m is not None and not 1 <= self.m < self.n:
            raise ValueError(f"m must satisfy 1 <= m < n, got m={self.m}, n={self.n}")

    @property
    def sp(self) -> float:
        return self.s * self.p


@lru_cache(maxsize=None)
def kernel_constant(n: int, s: float, p: float) -> float:
    """Normalization constant C(n, s, p) of the nonlocal kernel.

    C(n,s,p) = s p 2^(2s-1) G((n+sp)/2) / (2 pi^((n-1)/2) G(1-s) G((p+1)/2)).

    Strictly positive for every valid parameter tuple.  Memoized on the
    exact float bit patterns of (n, s, p) because assembly evaluates it
    inside pair loops.
    """
    params = FracParams(n=n, s=s, p=p)
    sp = params.sp
    num = sp * 2.0 ** (2.0 * s - 1.0) * gamma(0.5 * (n + sp))
    den = 2.0 * math.pi ** (0.5 * (n - 1)) * gamma(1.0 - s) * gamma(0.5 * (p + 1.0))
    return num / den


@lru_cache(maxsize=None)
def reduction_constant(m: int, n: int, s: float, p: float) -> float:
    """Constant relating kernel normalizations across dimensions.

    Closed form pi^(m/2) G((n-m+sp)/2) / G((n+sp)/2); equal to the
    integral  sphere_area(m) * int_0^inf t^(m-1) (1+t^2)^(-(n+sp)/2) dt,
    which the test suite checks by adaptive quadrature.  Satisfies

        kernel_constant(n,s,p) * reduction_constant(m,n,s,p)
            = kernel_constant(n-m,s,p).
    """
    FracParams(n=n, s=s, p=p, m=m)
    sp = s * p
    return math.pi ** (0.5 * m) * gamma(0.5 * (n - m + sp)) / gamma(0.5 * (n + sp))


def surface_element(sigma: Sequence[float]) -> float:
    """Hyperspherical surface element for angles sigma in
    (0,pi)^(n-2) x (0,2pi), where n-1 = len(sigma).

    Equals prod_{k=1}^{n-2} sin(sigma_k)^(n-k-1); the empty product at
    n = 2 is 1.  Integrating it over the whole angle box recovers
    sphere_area(n).
    """
    sig = [float(a) for a in sigma]
    if len(sig) < 1:
        raise ValueError("surface_element needs at least one angle (n >= 2)")
    n = len(sig) + 1
    for k, a in enumerate(sig):
        hi = 2.0 * math.pi if k == len(sig) - 1 else math.pi
        if not 0.0 < a < hi:
            raise ValueError(
                f"angle {k} = {a} outside (0, {'2*pi' if k == len(sig) - 1 else 'pi'})"
            )
    out = 1.0
    for k in range(n - 2):  # sigma_1 .. sigma_{n-2}, 1-based
        out *= math.sin(sig[k]) ** (n - (k + 1) - 1)
    return out


def cos_power_integral(n: int, s: float, p: float) -> float:
    """Closed form of the angular integral of |cos sigma_1|^(sp) against
    the hyperspherical surface element:

        (2 pi^((n-1)/2) / G((n-1)/2)) * B((n-1)/2, (sp+1)/2).

    Together with the kernel constants it satisfies the normalization
    identity  kernel_constant(n,s,p) / (2 kernel_constant(1,s,p))
    * cos_power_integral(n,s,p) = 1.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"cos_power_integral requires integer n >= 2, got {n}")
    sp = float(s) * float(p)
    if not sp > 0.0:
        raise ValueError(f"cos_power_integral requires s*p > 0, got {sp}")
    n = int(n)
    pref = 2.0 * math.pi ** (0.5 * (n - 1)) / gamma(0.5 * (n - 1))
    return pref * beta(0.5 * (n - 1), 0.5 * (sp + 1.0))
