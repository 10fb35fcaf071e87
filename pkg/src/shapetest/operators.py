"""Shape-enforcing operators: monotone rearrangement, greatest convex minorant,
least concave majorant, and their compositions.

All operators map a :class:`~shapetest.grids.GridFunction` to another function
on the same grid whose values satisfy the target shape. They are pure and safe
to apply in parallel across bootstrap draws.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .grids import GridFunction
from .linprog import LinearProgram, solve


def rearrange_1d(f: GridFunction) -> GridFunction:
    """Monotone (quantile) rearrangement on a univariate grid: sort the values.

    Stable sort, so ties keep their original grid order.
    """
    if f.grid.dim != 1:
        raise ValueError("rearrange_1d requires a univariate grid")
    return f.with_values(np.sort(f.values, kind="stable"))


def rearrange(f: GridFunction) -> GridFunction:
    """Multivariate rearrangement: average of axis-wise sorts over all axis orders.

    For each permutation of the axes, the values are sorted along one axis at a
    time (holding the others fixed); averaging over all d! orders removes the
    dependence on the order in which axes are processed. The output is weakly
    increasing in every argument.
    """
    d = f.grid.dim
    if d == 1:
        return rearrange_1d(f)
    cube = f.reshaped()
    acc = np.zeros_like(cube)
    nperm = 0
    for perm in itertools.permutations(range(d)):
        w = cube
        for ax in reversed(perm):
            w = np.sort(w, axis=ax, kind="stable")
        acc += w
        nperm += 1
    return f.with_values(acc / nperm)


def gcm_1d(f: GridFunction) -> GridFunction:
    """Greatest convex minorant on a univariate grid.

    The value at a grid point is the minimum over all chords of the input that
    bracket it (with the degenerate single-point chord included), i.e. the
    lower convex envelope of the points (z_j, f(z_j)). Computed by a monotone
    scan of the lower hull and linear interpolation along it.
    """
    if f.grid.dim != 1:
        raise ValueError("gcm_1d requires a univariate grid")
    z = np.asarray(f.grid.axes[0])
    v = f.values
    hull: list[int] = []
    for i in range(z.size):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop the middle point when it lies on or above chord (i0, i)
            if (v[i1] - v[i0]) * (z[i] - z[i0]) >= (v[i] - v[i0]) * (z[i1] - z[i0]):
                hull.pop()
            else:
                break
        hull.append(i)
    out = np.interp(z, z[hull], v[hull])
    return f.with_values(np.minimum(out, v))


def gcm_lp(f: GridFunction, l: int) -> float:
    """Biconjugate value at grid point ``l`` via linear programming.

    Solves  max v  s.t.  v + xi'(z_j - z_l) <= f(z_j) for every grid point j,
    over (v, xi); the optimum is the greatest convex minorant evaluated at z_l.
    Works in any dimension.
    """
    pts = f.grid.points()
    d = pts.shape[1]
    zl = pts[l]
    # columns: v, xi_1..xi_d, all free
    a = np.column_stack([np.ones(pts.shape[0]), pts - zl])
    c = np.zeros(d + 1)
    c[0] = -1.0  # maximize v
    lp = LinearProgram.build(c, a, f.values, "<=", lower=-np.inf, upper=np.inf)
    sol = solve(lp)
    return -sol.objective_value


def _envelope_multi(f: GridFunction) -> np.ndarray:
    """Lower convex envelope values at all grid points for d >= 2.

    Uses the convex hull of the lifted point cloud {(z_j, f(z_j))}: the
    envelope at z is the largest value among the lower-facet planes there.
    Falls back to the per-point LP when the cloud is degenerate (e.g. affine
    input, where the envelope equals the input).
    """
    pts = f.grid.points()
    lifted = np.column_stack([pts, f.values])
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        return np.array([gcm_lp(f, l) for l in range(pts.shape[0])])
    eq = hull.equations  # rows (n, b) with n.x + b <= 0 inside the hull
    lower = eq[eq[:, -2] < -1e-12]
    if lower.size == 0:
        return np.array([gcm_lp(f, l) for l in range(pts.shape[0])])
    planes = -(pts @ lower[:, :-2].T + lower[:, -1]) / lower[:, -2]
    return np.minimum(planes.max(axis=1), f.values)


def gcm(f: GridFunction) -> GridFunction:
    """Greatest convex minorant on the grid (any dimension)."""
    if f.grid.dim == 1:
        return gcm_1d(f)
    return f.with_values(_envelope_multi(f))


def lcm(f: GridFunction) -> GridFunction:
    """Least concave majorant: -GCM(-f)."""
    return f.with_values(-gcm(f.with_values(-f.values)).values)


@dataclass(frozen=True)
class ShapeOperator:
    """A named shape-enforcing operator, possibly a composition.

    Compositions apply their members left to right; for the joint
    monotone-plus-convex restriction the valid order is rearrangement first,
    then GCM (the reverse composition does not fix the joint cone).
    """

    kind: str
    parts: tuple["ShapeOperator", ...] = ()

    _KINDS = ("rearrange", "gcm", "lcm", "compose")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "compose" and len(self.parts) < 2:
            raise ValueError("compose needs at least two operators")
        if self.kind != "compose" and self.parts:
            raise ValueError("only compose takes parts")

    @classmethod
    def rearrangement(cls) -> "ShapeOperator":
        return cls("rearrange")

    @classmethod
    def convex_minorant(cls) -> "ShapeOperator":
        return cls("gcm")

    @classmethod
    def concave_majorant(cls) -> "ShapeOperator":
        return cls("lcm")

    @classmethod
    def compose(cls, *ops: "ShapeOperator") -> "ShapeOperator":
        return cls("compose", tuple(ops))

    def __call__(self, f: GridFunction) -> GridFunction:
        if self.kind == "rearrange":
            return rearrange(f)
        if self.kind == "gcm":
            return gcm(f)
        if self.kind == "lcm":
            return lcm(f)
        out = f
        for op in self.parts:
            out = op(out)
        return out


def apply(op: ShapeOperator, f: GridFunction) -> GridFunction:
    """Apply a shape operator to a grid function."""
    return op(f)
