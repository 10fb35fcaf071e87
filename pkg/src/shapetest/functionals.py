"""Wald functionals: nonnegative maps that vanish exactly on the shape cone.

Two forms are provided. The operator-residual form measures the distance from
a function to its shape-enforced image, ``|f - T(f)|_p``; with the convex
minorant or concave majorant this is positively homogeneous, convex and
1-Lipschitz, which is what the bootstrap test requires. With the rearrangement
operator the residual fails convexity and is only useful as a diagnostic. The
cone-distance form measures the sup-norm distance to the cone of functions
satisfying the restriction and is computed by linear programming.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import operators as ops
from .grids import Grid, GridFunction, diff, norm
from .linprog import LinearProgram, LpStatus, NumericalFailure, solve

RESTRICTIONS = (
    "monotone",
    "convex",
    "concave",
    "monotone_convex",
    "monotone_concave",
)


class UnsupportedShapeError(ValueError):
    """Requested restriction has no supported constraint representation."""


@dataclass(frozen=True)
class ShapeSpec:
    """A shape restriction on a d-dimensional regression function."""

    restriction: str
    dim: int = 1

    def __post_init__(self):
        if self.restriction not in RESTRICTIONS:
            raise ValueError(f"unknown restriction {self.restriction!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def monotone_part(self) -> bool:
        return self.restriction.startswith("monotone")

    @property
    def curvature(self) -> str | None:
        if "convex" in self.restriction:
            return "convex"
        if "concave" in self.restriction:
            return "concave"
        return None

    def constraint_matrix(self, grid: Grid) -> np.ndarray:
        """Matrix A with {h : A h >= 0} the grid version of the restriction.

        Monotonicity contributes first differences along every axis; convexity
        (concavity) contributes nonnegative (nonpositive) second divided
        differences along every axis.
        """
        if grid.dim != self.dim:
            raise ValueError(f"grid dimension {grid.dim} != shape dimension {self.dim}")
        blocks = []
        if self.monotone_part:
            blocks.extend(_first_difference_rows(grid))
        if self.curvature is not None:
            sign = 1.0 if self.curvature == "convex" else -1.0
            blocks.extend(sign * b for b in _second_difference_rows(grid))
        return np.vstack(blocks)

    def gamma_operator(self) -> ops.ShapeOperator:
        """The restriction map used to impose the null inside the bootstrap.

        Rearrangement for monotonicity, GCM/LCM for convexity/concavity, and
        rearrangement followed by GCM/LCM for the joint restrictions.
        """
        if self.restriction == "monotone":
            return ops.ShapeOperator.rearrangement()
        if self.restriction == "convex":
            return ops.ShapeOperator.convex_minorant()
        if self.restriction == "concave":
            return ops.ShapeOperator.concave_majorant()
        second = (
            ops.ShapeOperator.convex_minorant()
            if self.restriction == "monotone_convex"
            else ops.ShapeOperator.concave_majorant()
        )
        return ops.ShapeOperator.compose(ops.ShapeOperator.rearrangement(), second)

    def satisfied_by(self, f: GridFunction, tol: float = 1e-8) -> bool:
        a = self.constraint_matrix(f.grid)
        scale = 1.0 + float(np.max(np.abs(f.values)))
        return bool(np.all(a @ f.values >= -tol * scale))


def _axis_neighbor_pairs(grid: Grid, axis: int, width: int):
    """Index pairs/triples of grid points adjacent along one axis."""
    shape = grid.shape
    idx = np.arange(grid.size).reshape(shape)
    moved = np.moveaxis(idx, axis, -1)
    flat = moved.reshape(-1, shape[axis])
    groups = []
    for off in range(width + 1):
        groups.append(flat[:, off : shape[axis] - width + off].ravel())
    return groups


def _first_difference_rows(grid: Grid):
    rows = []
    n = grid.size
    for axis in range(grid.dim):
        lo, hi = _axis_neighbor_pairs(grid, axis, 1)
        block = np.zeros((lo.size, n))
        block[np.arange(lo.size), hi] = 1.0
        block[np.arange(lo.size), lo] = -1.0
        rows.append(block)
    return rows


def _second_difference_rows(grid: Grid):
    rows = []
    n = grid.size
    for axis in range(grid.dim):
        z = np.asarray(grid.axes[axis])
        if z.size < 3:
            continue
        left, mid, right = _axis_neighbor_pairs(grid, axis, 2)
        ncell = z.size - 2
        d1 = np.tile(z[1:-1] - z[:-2], left.size // ncell)
        d2 = np.tile(z[2:] - z[1:-1], left.size // ncell)
        block = np.zeros((left.size, n))
        r = np.arange(left.size)
        block[r, right] = 1.0 / d2
        block[r, mid] = -(1.0 / d1 + 1.0 / d2)
        block[r, left] = 1.0 / d1
        rows.append(block)
    return rows


@dataclass(frozen=True)
class OperatorResidual:
    """phi(f) = |f - op(f)|_p for a shape-enforcing operator."""

    op: ops.ShapeOperator
    p: float = np.inf

    def evaluate(self, f: GridFunction) -> float:
        return norm(diff(f, ops.apply(self.op, f)), self.p)

    @property
    def conforming(self) -> bool:
        # GCM/LCM residuals are homogeneous, convex and Lipschitz; the
        # rearrangement residual is not convex (and compositions are not
        # established either), so those are diagnostics only.
        return self.op.kind in ("gcm", "lcm")


@dataclass(frozen=True)
class ConeDistance:
    """phi(f) = inf over the restriction cone of |f - h|_inf, via LP."""

    shape: ShapeSpec

    def __post_init__(self):
        if self.shape.dim >= 2 and self.shape.restriction in ("convex", "concave"):
            raise UnsupportedShapeError(
                "pure convexity/concavity distance is not supported for d >= 2; "
                "use the operator-residual functional instead"
            )

    def evaluate(self, f: GridFunction) -> float:
        a_cone = self.shape.constraint_matrix(f.grid)
        n = f.grid.size
        k = a_cone.shape[0]
        a = np.zeros((2 * n + k, n + 1))
        r = np.arange(n)
        a[r, r] = -1.0       # f - h <= t
        a[n + r, r] = 1.0    # h - f <= t
        a[: 2 * n, n] = -1.0
        a[2 * n :, :n] = a_cone
        b = np.concatenate([-f.values, f.values, np.zeros(k)])
        senses = ["<="] * (2 * n) + [">="] * k
        c = np.zeros(n + 1)
        c[n] = 1.0
        # One-sided clamp on h: pointwise max with a constant stays in cones
        # with a convex/monotone description, pointwise min in concave ones,
        # and either move weakly shrinks |f - h|, so the optimum is unchanged.
        lower = np.full(n + 1, -np.inf)
        upper = np.full(n + 1, np.inf)
        if self.shape.curvature == "concave":
            upper[:n] = f.values.max()
        else:
            lower[:n] = f.values.min()
        lower[n] = 0.0
        sol = solve(LinearProgram.build(c, a, b, senses, lower=lower, upper=upper))
        if sol.status is not LpStatus.OPTIMAL:
            raise NumericalFailure(f"cone distance LP ended with status {sol.status}")
        return max(sol.objective_value, 0.0)

    @property
    def conforming(self) -> bool:
        # distance to a nonempty closed convex cone always conforms
        return True


WaldFunctional = Union[OperatorResidual, ConeDistance]


def evaluate(phi: WaldFunctional, f: GridFunction) -> float:
    """Evaluate a Wald functional at a grid function."""
    return phi.evaluate(f)


def conforms_to_assumption1(phi: WaldFunctional) -> bool:
    """Whether phi is positively homogeneous, convex and Lipschitz."""
    return phi.conforming


def functional_for_shape(shape: ShapeSpec) -> WaldFunctional:
    """The test functional used for each restriction.

    Sup-norm cone distance for monotonicity and the joint restrictions,
    GCM/LCM residual for convexity/concavity.
    """
    if shape.restriction == "convex":
        return OperatorResidual(ops.ShapeOperator.convex_minorant())
    if shape.restriction == "concave":
        return OperatorResidual(ops.ShapeOperator.concave_majorant())
    return ConeDistance(shape)
