"""Rectangular evaluation grids and functions stored on them.

Grid functions are the common currency of the package: estimated regression
curves, bootstrap draws and shape-operator outputs all live on the same grid.
Values are stored in axis-major order (last axis fastest), which every
constraint builder and operator in the package relies on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Rectangular grid over a box, one strictly increasing coordinate list per axis."""

    axes: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.axes:
            raise ValueError("grid needs at least one axis")
        axes = tuple(tuple(float(x) for x in ax) for ax in self.axes)
        object.__setattr__(self, "axes", axes)
        for ax in axes:
            if len(ax) < 2:
                raise ValueError("each grid axis needs at least 2 points")
            if not all(b > a for a, b in zip(ax, ax[1:])):
                raise ValueError("grid axis coordinates must be strictly increasing")

    @classmethod
    def uniform(cls, n: int, lo: float = 0.0, hi: float = 1.0, dim: int = 1) -> "Grid":
        """Uniform grid z_j = lo + (hi-lo)*j/(n-1) on each of `dim` axes."""
        axis = tuple(np.linspace(lo, hi, n))
        return cls(axes=(axis,) * dim)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All grid points as a (size, dim) array, last axis fastest."""
        mesh = np.meshgrid(*[np.asarray(ax) for ax in self.axes], indexing="ij")
        return np.column_stack([m.ravel(order="C") for m in mesh])

    def indices(self):
        """Iterate multi-indices in storage order."""
        return itertools.product(*[range(len(ax)) for ax in self.axes])


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function represented by its values on a grid.

    Values are immutable after construction and may be shared freely across
    threads or worker processes.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel(order="C").copy()
        if v.size != self.grid.size:
            raise ValueError(
                f"got {v.size} values for a grid with {self.grid.size} points"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def reshaped(self) -> np.ndarray:
        """Values as an array with one dimension per grid axis."""
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(a))

    __rmul__ = __mul__


def _check_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise ValueError("grid mismatch between grid functions")


def _trapezoid_weights(axis: tuple[float, ...]) -> np.ndarray:
    x = np.asarray(axis)
    w = np.empty_like(x)
    w[0] = (x[1] - x[0]) / 2.0
    w[-1] = (x[-1] - x[-2]) / 2.0
    if x.size > 2:
        w[1:-1] = (x[2:] - x[:-2]) / 2.0
    return w


def cell_weights(grid: Grid) -> np.ndarray:
    """Tensor-product trapezoid quadrature weights, flattened in storage order."""
    w = _trapezoid_weights(grid.axes[0])
    for ax in grid.axes[1:]:
        w = np.multiply.outer(w, _trapezoid_weights(ax))
    return w.ravel(order="C")


def norm(f: GridFunction, p: float = np.inf) -> float:
    """Grid L^p norm of f: max |value| for p = inf, trapezoid quadrature for p in {1, 2}."""
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max())
    if p == 1:
        return float(cell_weights(f.grid) @ a)
    if p == 2:
        return float(np.sqrt(cell_weights(f.grid) @ (a * a)))
    raise ValueError(f"unsupported norm order {p!r}; use 1, 2 or inf")


def diff(f: GridFunction, g: GridFunction) -> GridFunction:
    """Pointwise difference f - g on a common grid."""
    return f - g
