"""B-spline sieve bases with empirical-quantile interior knots.

Univariate bases are clamped (open-uniform) B-splines of degree 2 or 3;
bivariate regression uses their tensor products. Interior knots sit at the
equispaced empirical quantiles of the regressors, boundary knots at the sample
range. Evaluation points outside the boundary are clamped so that fitted
curves stay defined on the full reporting grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline


class DegenerateSampleError(ValueError):
    """Empirical knot quantiles coincide; the sample cannot support the basis."""


@dataclass(frozen=True)
class SplineBasis:
    """Tensor-product B-spline basis; ``knots`` holds one full knot vector per axis."""

    degree: int
    knots: tuple[tuple[float, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.knots)

    @property
    def boundary(self) -> tuple[tuple[float, float], ...]:
        return tuple((t[0], t[-1]) for t in self.knots)

    @property
    def axis_dims(self) -> tuple[int, ...]:
        return tuple(len(t) - self.degree - 1 for t in self.knots)

    @property
    def k_n(self) -> int:
        return int(np.prod(self.axis_dims))

    @property
    def n_interior(self) -> tuple[int, ...]:
        return tuple(len(t) - 2 * (self.degree + 1) for t in self.knots)


def build_basis(degree: int, n_knots, data) -> SplineBasis:
    """Basis of the given degree with interior knots at empirical quantiles.

    ``n_knots`` is an interior-knot count, one integer per axis (a scalar is
    broadcast). Interior knots are placed at the i/(m+1) quantiles of each
    regressor, i = 1..m, with boundary knots at the sample min/max repeated
    degree+1 times.
    """
    if degree not in (2, 3):
        raise ValueError("degree must be 2 (quadratic) or 3 (cubic)")
    z = np.asarray(data, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    d = z.shape[1]
    counts = np.broadcast_to(np.asarray(n_knots, dtype=int), (d,))
    if z.shape[0] <= int(counts.max()):
        raise ValueError("sample size must exceed the number of interior knots")
    vectors = []
    for axis in range(d):
        x = z[:, axis]
        lo, hi = float(x.min()), float(x.max())
        m = int(counts[axis])
        if hi <= lo:
            raise DegenerateSampleError(f"axis {axis} has zero range")
        interior = np.quantile(x, [(i + 1) / (m + 1) for i in range(m)]) if m else np.empty(0)
        if m and (
            np.any(np.diff(interior) <= 0)
            or interior[0] <= lo
            or interior[-1] >= hi
        ):
            raise DegenerateSampleError(
                f"axis {axis}: quantile knots coincide or touch the boundary"
            )
        t = np.concatenate([[lo] * (degree + 1), interior, [hi] * (degree + 1)])
        vectors.append(tuple(t))
    return SplineBasis(degree=degree, knots=tuple(vectors))


def _axis_design(x: np.ndarray, t: tuple[float, ...], degree: int) -> np.ndarray:
    knots = np.asarray(t)
    clamped = np.clip(x, knots[0], knots[-1])
    return BSpline.design_matrix(clamped, knots, degree, extrapolate=False).toarray()


def design_matrix(basis: SplineBasis, points) -> np.ndarray:
    """Basis values at each point, one row per point, k_n columns.

    For tensor-product bases the row is the outer product of the per-axis
    rows, flattened with the last axis fastest (matching grid storage order).
    Rows sum to one by the partition of unity.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != basis.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, basis has {basis.dim}")
    out = _axis_design(pts[:, 0], basis.knots[0], basis.degree)
    for axis in range(1, basis.dim):
        nxt = _axis_design(pts[:, axis], basis.knots[axis], basis.degree)
        out = np.einsum("ij,ik->ijk", out, nxt).reshape(pts.shape[0], -1)
    return out
