"""Periodic structured grids and deterministic field algebra.

All integrals are midpoint (cell-sum) quadrature with the cell volume
``prod(h_i)``.  Reductions go through :func:`math.fsum` in flat row-major
order, so every sum is exact to the final rounding and bitwise reproducible
regardless of how the surrounding code is parallelised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, NonFiniteFieldError

__all__ = [
    "GridSpec",
    "ScalarField",
    "SubdomainMask",
    "integrate",
    "lp_norm",
    "dilate",
    "chebyshev_distance",
]


@dataclass(frozen=True)
class GridSpec:
    """Flat periodic grid: ``sizes[i]`` points on a torus of period ``lengths[i]``."""

    n: int
    sizes: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        if self.n < 3:
            raise ValueError(f"dimension must be >= 3, got {self.n}")
        if len(self.sizes) != self.n or len(self.lengths) != self.n:
            raise ValueError("sizes and lengths must have one entry per dimension")
        if any(s < 4 for s in self.sizes):
            raise ValueError(f"all sizes must be >= 4, got {self.sizes}")
        if any(L <= 0.0 for L in self.lengths):
            raise ValueError(f"all lengths must be positive, got {self.lengths}")

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / s for L, s in zip(self.lengths, self.sizes))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def num_points(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacings[axis]
        return np.arange(self.sizes[axis]) * h

    def meshgrid(self) -> list[np.ndarray]:
        axes = [self.axis_coordinates(i) for i in range(self.n)]
        return list(np.meshgrid(*axes, indexing="ij"))


def _first_bad_index(bad: np.ndarray) -> tuple[int, tuple[int, ...]]:
    flat = int(np.flatnonzero(bad.ravel(order="C"))[0])
    return flat, tuple(int(i) for i in np.unravel_index(flat, bad.shape))


class ScalarField:
    """One float64 value per grid point, stored row-major in the grid shape."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != grid.num_points:
            raise ValueError(
                f"expected {grid.num_points} values for grid {grid.sizes}, got {arr.size}"
            )
        arr = np.ascontiguousarray(arr.reshape(grid.shape))
        finite = np.isfinite(arr)
        if not finite.all():
            flat, multi = _first_bad_index(~finite)
            raise NonFiniteFieldError(
                f"non-finite value {arr.reshape(-1)[flat]!r} at flat index {flat} {multi}"
            )
        self.grid = grid
        self.values = arr

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def __repr__(self):
        return f"ScalarField(grid={self.grid.sizes}, min={self.min():g}, max={self.max():g})"


class SubdomainMask:
    """Boolean field marking the points of an open subdomain."""

    __slots__ = ("grid", "inside")

    def __init__(self, grid: GridSpec, inside):
        arr = np.asarray(inside, dtype=bool)
        if arr.size != grid.num_points:
            raise ValueError(
                f"expected {grid.num_points} flags for grid {grid.sizes}, got {arr.size}"
            )
        self.grid = grid
        self.inside = np.ascontiguousarray(arr.reshape(grid.shape))

    @classmethod
    def empty(cls, grid: GridSpec) -> "SubdomainMask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: GridSpec) -> "SubdomainMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    @property
    def is_empty(self) -> bool:
        return not bool(self.inside.any())

    def complement(self) -> "SubdomainMask":
        return SubdomainMask(self.grid, ~self.inside)

    def issubset(self, other: "SubdomainMask") -> bool:
        return bool(np.all(other.inside | ~self.inside))

    def __eq__(self, other):
        return (
            isinstance(other, SubdomainMask)
            and self.grid == other.grid
            and bool(np.array_equal(self.inside, other.inside))
        )

    def __repr__(self):
        return f"SubdomainMask(grid={self.grid.sizes}, count={self.count})"


def require_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def _fsum(values: np.ndarray) -> float:
    # math.fsum is exactly rounded, hence independent of grouping/threading.
    return math.fsum(values.ravel(order="C").tolist())


def integrate(w: ScalarField) -> float:
    """Cell-sum integral of ``w`` against the background volume element."""
    finite = np.isfinite(w.values)
    if not finite.all():
        flat, multi = _first_bad_index(~finite)
        raise NonFiniteFieldError(f"non-finite value at flat index {flat} {multi}")
    return _fsum(w.values) * w.grid.cell_volume


def lp_norm(w: ScalarField, weight: ScalarField, p: float) -> float:
    """``(integral of |w|^p * weight dV)^(1/p)`` for ``p >= 1``."""
    require_same_grid(w, weight)
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    if weight.values.min() < 0.0:
        flat, multi = _first_bad_index(weight.values < 0.0)
        raise ValueError(f"negative weight at flat index {flat} {multi}")
    total = _fsum(np.abs(w.values) ** p * weight.values) * w.grid.cell_volume
    return total ** (1.0 / p)


def _dilate_once(inside: np.ndarray) -> np.ndarray:
    # Per-axis 1-step dilation composes to the Chebyshev ball.
    out = inside
    for axis in range(inside.ndim):
        out = out | np.roll(out, 1, axis=axis) | np.roll(out, -1, axis=axis)
    return out


def dilate(mask: SubdomainMask, r: int) -> SubdomainMask:
    """Grow the mask by ``r`` cells in periodic Chebyshev distance."""
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    out = mask.inside
    for _ in range(r):
        out = _dilate_once(out)
    return SubdomainMask(mask.grid, out)


def chebyshev_distance(mask: SubdomainMask, cap: int) -> np.ndarray:
    """Periodic Chebyshev grid distance to the mask, saturated at ``cap + 1``.

    Points inside the mask get 0; points not reached within ``cap`` dilation
    steps get ``cap + 1``.  An empty mask gives ``cap + 1`` everywhere.
    """
    dist = np.full(mask.grid.shape, cap + 1, dtype=np.int64)
    reached = mask.inside
    dist[reached] = 0
    for r in range(1, cap + 1):
        grown = _dilate_once(reached)
        dist[grown & ~reached] = r
        reached = grown
    return dist
