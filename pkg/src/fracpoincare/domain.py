"""Product domains, uniform tensor grids, and grid functions.

Domains are finite products of half-open axis intervals [a_i, b_i).
Cylinders ell*omega1 x omega and dilations t*Omega are represented as
tagged boxes so the originating parameters stay queryable.  Grids are
cell-centered: every node is a cell midpoint strictly inside the open
domain, which lets the zero exterior extension encode the Dirichlet
condition without special boundary rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "DomainSpec",
    "Grid",
    "GridFunction",
    "box",
    "build_grid",
    "cylinder",
    "dilate",
]

Factor = Tuple[float, float]


class ConfigurationError(ValueError):
    """Raised for invalid domain/grid configuration requests."""


def _validate_factors(factors: Sequence[Sequence[float]]) -> Tuple[Factor, ...]:
    if len(factors) == 0:
        raise ValueError("domain needs at least one axis interval")
    out = []
    for i, f in enumerate(factors):
        a, b = float(f[0]), float(f[1])
        if not a < b:
            raise ValueError(f"axis {i}: empty interval [{a}, {b})")
        out.append((a, b))
    return tuple(out)


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned product domain with provenance tag.

    kind is one of "box", "cylinder" (first `free_dims` factors are
    ell * omega1), or "dilation" (all factors of `base` scaled by
    `scale`).  Equality compares factors and tag data, so collapsing
    dilations (see `dilate`) restores the original object.
    """

    factors: Tuple[Factor, ...]
    kind: str = "box"
    ell: Optional[float] = None
    free_dims: Optional[int] = None
    cross_section: Optional[Tuple[Factor, ...]] = None
    base: Optional["DomainSpec"] = None
    scale: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "factors", _validate_factors(self.factors))
        if self.kind not in ("box", "cylinder", "dilation"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "cylinder":
            m, n = self.free_dims, self.dim
            if m is None or not 1 <= m < n:
                raise ValueError(f"cylinder free_dims must satisfy 1 <= m < n, got {m}")
            if self.ell is None or not self.ell > 0:
                raise ValueError(f"cylinder ell must be positive, got {self.ell}")
        if self.kind == "dilation" and (self.scale is None or not self.scale > 0):
            raise ValueError(f"dilation scale must be positive, got {self.scale}")

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def lengths(self) -> Tuple[float, ...]:
        return tuple(b - a for a, b in self.factors)

    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, other: "DomainSpec") -> bool:
        """Factor-wise inclusion other subseteq self."""
        if other.dim != self.dim:
            return False
        return all(
            a1 <= a2 and b2 <= b1
            for (a1, b1), (a2, b2) in zip(self.factors, other.factors)
        )


def box(*factors: Sequence[float]) -> DomainSpec:
    """Plain product domain from (a, b) pairs."""
    return DomainSpec(factors=tuple(tuple(f) for f in factors))


def cylinder(ell: float, omega1, omega) -> DomainSpec:
    """Cylinder ell*omega1 x omega.

    omega1 and omega are boxes (DomainSpec or sequences of (a, b)
    pairs) in R^m and R^(n-m); the first m factors of the result are
    the factors of omega1 scaled by ell.
    """
    ell = float(ell)
    if not ell > 0:
        raise ValueError(f"ell must be positive, got {ell}")
    f1 = omega1.factors if isinstance(omega1, DomainSpec) else _validate_factors(omega1)
    f2 = omega.factors if isinstance(omega, DomainSpec) else _validate_factors(omega)
    scaled = tuple((ell * a, ell * b) for a, b in f1)
    return DomainSpec(
        factors=scaled + f2,
        kind="cylinder",
        ell=ell,
        free_dims=len(f1),
        cross_section=f2,
    )


def dilate(domain: DomainSpec, t: float) -> DomainSpec:
    """Scaled domain t*Omega.

    Nested dilations collapse multiplicatively, so
    dilate(dilate(Omega, t), 1/t) returns an object equal to Omega
    whenever t*(1/t) rounds to exactly 1 (in particular for powers of
    two).
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError(f"dilation factor must be positive, got {t}")
    base = domain
    total = t
    if domain.kind == "dilation":
        base = domain.base
        total = domain.scale * t
    if total == 1.0:
        return base
    scaled = tuple((total * a, total * b) for a, b in base.factors)
    return DomainSpec(factors=scaled, kind="dilation", base=base, scale=total)


def _cell_count(length: float, target_h: float) -> int:
    # Snap to an integer cell count by shrinking h, never by clipping;
    # the 1e-9 guard keeps exact ratios (2/0.5 = 4) from rounding up.
    r = length / target_h
    c = math.ceil(r - 1e-9)
    return max(c, 2)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered tensor lattice over a domain."""

    domain: DomainSpec
    shape: Tuple[int, ...]
    h: Tuple[float, ...]
    axes: Tuple[np.ndarray, ...] = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def nodes(self) -> np.ndarray:
        """(N, dim) array of node coordinates, row-major in the lattice."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def node_count(self) -> int:
        return self.size


def build_grid(domain: DomainSpec, target_h: float) -> Grid:
    """Uniform cell-centered grid with per-axis spacing <= target_h.

    Each factor length is divided into an integer number of equal
    cells; nodes sit at cell midpoints a + (i + 1/2) h.
    """
    target_h = float(target_h)
    if not target_h > 0.0:
        raise ConfigurationError(f"target_h must be positive, got {target_h}")
    shortest = min(domain.lengths)
    if target_h > 0.5 * shortest:
        raise ConfigurationError(
            f"target_h = {target_h} exceeds half the shortest factor "
            f"length ({0.5 * shortest}); need at least two cells per axis"
        )
    shape = []
    spacing = []
    axes = []
    for (a, b) in domain.factors:
        c = _cell_count(b - a, target_h)
        h = (b - a) / c
        idx = np.arange(c, dtype=np.float64)
        axes.append(a + (idx + 0.5) * h)
        shape.append(c)
        spacing.append(h)
    return Grid(domain=domain, shape=tuple(shape), h=tuple(spacing), axes=tuple(axes))


@dataclass
class GridFunction:
    """Real values at the nodes of a grid, implicitly zero outside the
    open domain (the discrete zero-extension class)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation at arbitrary points, zero outside
        the open domain.

        Between the first/last node layer and the boundary the values
        taper linearly to the implicit exterior zero.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = self.grid.dim
        if pts.shape[1] != n:
            raise ValueError(f"points must have {n} columns, got {pts.shape[1]}")
        # Pad each axis with a zero layer half a cell outside the domain
        # so interpolation decays to 0 at the boundary instead of
        # extrapolating.
        padded = np.pad(self.values, [(1, 1)] * n, mode="constant")
        out = np.zeros(pts.shape[0])
        idx = []
        wts = []
        inside = np.ones(pts.shape[0], dtype=bool)
        for ax in range(n):
            a, b = self.grid.domain.factors[ax]
            h = self.grid.h[ax]
            x = pts[:, ax]
            inside &= (x > a) & (x < b)
            # Fractional index into the padded axis (node j at a+(j-0.5)h).
            f = (x - a) / h + 0.5
            j = np.floor(f).astype(np.int64)
            t = f - j
            j = np.clip(j, 0, self.grid.shape[ax])
            idx.append(j)
            wts.append(t)
        for corner in range(1 << n):
            w = np.ones(pts.shape[0])
            flat = np.zeros(pts.shape[0], dtype=np.int64)
            for ax in range(n):
                bit = (corner >> ax) & 1
                j = idx[ax] + bit
                w = w * (wts[ax] if bit else (1.0 - wts[ax]))
                flat = flat * padded.shape[ax] + j
            out += w * padded.ravel()[flat]
        out[~inside] = 0.0
        return out
