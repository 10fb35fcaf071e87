"""Series least squares and the multiplier (score) bootstrap.

The regression function is estimated by OLS of the outcome on a B-spline
basis, optionally alongside linear control variables (the partially linear
model used in the empirical workflow; controls enter the same OLS jointly,
which is equivalent to partialling out). Bootstrap fluctuations are generated
by perturbing the fitted score with i.i.d. standard normal weights and carry
the estimator's convergence rate so they are directly comparable to the
scaled test statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Grid, GridFunction
from .splines import SplineBasis, design_matrix

# condition-number ceiling for the stacked design, checked before solving
_COND_LIMIT = 1e10


class RankDeficientError(ValueError):
    """Design matrix is numerically rank deficient."""


@dataclass(frozen=True)
class Sample:
    """Regression data: outcome y, covariates z (n x d), optional controls w (n x q)."""

    y: np.ndarray
    z: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).ravel()
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        w = None
        if self.w is not None:
            w = np.asarray(self.w, dtype=np.float64)
            if w.ndim == 1:
                w = w[:, None]
            if w.shape[0] != y.size:
                raise ValueError("controls and outcome have different row counts")
            if not np.all(np.isfinite(w)):
                raise ValueError("controls must be finite")
        if z.shape[0] != y.size:
            raise ValueError("covariates and outcome have different row counts")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise ValueError("sample entries must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.z.shape[1]


@dataclass(frozen=True)
class SeriesFit:
    """Fitted sieve regression with everything the bootstrap needs cached."""

    basis: SplineBasis
    beta: np.ndarray
    gamma: np.ndarray | None
    residuals: np.ndarray = field(repr=False)
    gram_inverse: np.ndarray = field(repr=False)
    n: int

    @property
    def k_n(self) -> int:
        return self.basis.k_n

    @property
    def r_n(self) -> float:
        """Convergence rate sqrt(n / k_n)."""
        return float(np.sqrt(self.n / self.k_n))

    @property
    def c_n(self) -> float:
        """Coupling rate 1 / log n."""
        return float(1.0 / np.log(self.n))


def fit(sample: Sample, basis: SplineBasis) -> SeriesFit:
    """Least squares of y on the spline basis and any controls."""
    p = design_matrix(basis, sample.z)
    k = p.shape[1]
    q = 0 if sample.w is None else sample.w.shape[1]
    if sample.n <= k + q:
        raise ValueError(f"need n > k_n + q = {k + q}, got n = {sample.n}")
    x = p if sample.w is None else np.hstack([p, sample.w])
    svals = np.linalg.svd(x, compute_uv=False)
    if svals[-1] <= 0 or svals[0] / svals[-1] > _COND_LIMIT:
        raise RankDeficientError(
            f"design condition number {svals[0] / max(svals[-1], 1e-300):.2e} exceeds {_COND_LIMIT:.0e}"
        )
    coef, *_ = np.linalg.lstsq(x, sample.y, rcond=None)
    residuals = sample.y - x @ coef
    gram_inverse = np.linalg.inv(p.T @ p / sample.n)
    return SeriesFit(
        basis=basis,
        beta=coef[:k],
        gamma=coef[k:] if q else None,
        residuals=residuals,
        gram_inverse=gram_inverse,
        n=sample.n,
    )


def eval_on_grid(fit_: SeriesFit, grid: Grid) -> GridFunction:
    """The fitted regression function on a grid (controls excluded)."""
    return GridFunction(grid, design_matrix(fit_.basis, grid.points()) @ fit_.beta)


@dataclass(frozen=True)
class BootstrapEnsemble:
    """B multiplier-bootstrap fluctuation draws evaluated on a common grid."""

    grid: Grid
    draws: np.ndarray = field(repr=False)  # (B, grid.size)
    seed: object = None
    sup_norms: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] != self.grid.size:
            raise ValueError("draws must be a (B, grid size) array with B >= 1")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)
        object.__setattr__(self, "sup_norms", np.abs(d).max(axis=1))

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    def function(self, b: int) -> GridFunction:
        return GridFunction(self.grid, self.draws[b])


def _draw_generator(seed, b: int) -> np.random.Generator:
    # substream (seed, b): deterministic and independent across draws
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(b,)))


def score_bootstrap(
    fit_: SeriesFit,
    sample: Sample,
    grid: Grid,
    n_draws: int,
    seed,
) -> BootstrapEnsemble:
    """Score bootstrap with i.i.d. standard normal multiplier weights.

    Draw b evaluates, at each grid point z,

        r_n * p(z)' (P'P/n)^{-1} (1/n) sum_i p(Z_i) u_hat_i w_{i,b},

    where P is the spline design, u_hat the fitted residuals and w ~ N(0, 1).
    Deterministic given the seed; draw b depends only on (seed, b).
    """
    if n_draws < 1:
        raise ValueError("need at least one bootstrap draw")
    p_sample = design_matrix(fit_.basis, sample.z)
    p_grid = design_matrix(fit_.basis, grid.points())
    scores = p_sample * fit_.residuals[:, None]          # (n, k)
    transfer = (p_grid @ fit_.gram_inverse @ scores.T) * (fit_.r_n / sample.n)
    draws = np.empty((n_draws, grid.size))
    for b in range(n_draws):
        omega = _draw_generator(seed, b).standard_normal(sample.n)
        draws[b] = transfer @ omega
    return BootstrapEnsemble(grid=grid, draws=draws, seed=seed)
