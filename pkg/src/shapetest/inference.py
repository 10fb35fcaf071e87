"""The bootstrap shape test: statistic, data-driven tuning, critical value.

The test statistic is the scaled Wald functional r_n * phi(theta_hat) on the
reporting grid. Critical values come from the multiplier bootstrap: each draw
is shifted by kappa_hat times the shape-enforced fit, where kappa_hat =
r_n * c_n / tau_hat and tau_hat is a high empirical quantile of the bootstrap
sup norms. Empirical quantiles use the ceil(q*B) order statistic, the
right-continuous inverse of the bootstrap distribution.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import BootstrapEnsemble, Sample, SeriesFit, eval_on_grid, fit, score_bootstrap
from .functionals import WaldFunctional, conforms_to_assumption1, evaluate
from .grids import Grid, GridFunction
from .linprog import NumericalFailure
from .operators import ShapeOperator, apply
from .splines import build_basis

REPORT_SCHEMA = "shapetest-report/1"

# share of bootstrap draws whose functional evaluation may fail before the
# critical-value computation aborts
_MAX_FAILURE_SHARE = 0.01


class TestStageError(RuntimeError):
    """An error in one stage of the test pipeline, labeled with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


@dataclass(frozen=True)
class GammaRule:
    """Rule for the bootstrap tail level gamma_n used in the tuning quantile."""

    kind: str  # "fixed" | "logn" | "invn"
    value: float = math.nan

    def __post_init__(self):
        if self.kind not in ("fixed", "logn", "invn"):
            raise ValueError(f"unknown gamma rule {self.kind!r}")
        if self.kind == "fixed" and not (0.0 < self.value < 1.0):
            raise ValueError("fixed gamma must lie in (0, 1)")

    def gamma(self, n: int) -> float:
        if self.kind == "fixed":
            return self.value
        if self.kind == "logn":
            return 0.01 / math.log(n)
        return 1.0 / n

    @property
    def label(self) -> str:
        return f"fixed:{self.value:g}" if self.kind == "fixed" else self.kind

    @classmethod
    def parse(cls, text: str) -> "GammaRule":
        text = text.strip().lower()
        if text in ("logn", "lognrule"):
            return cls("logn")
        if text in ("invn", "1/n"):
            return cls("invn")
        if text.startswith("fixed:"):
            return cls("fixed", float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse gamma rule {text!r}; use logn, invn or fixed:G")


@dataclass(frozen=True)
class TestConfig:
    """Everything run_test needs besides the data."""

    functional: WaldFunctional
    gamma_op: ShapeOperator
    grid: Grid
    alpha: float = 0.05
    gamma_rule: GammaRule = GammaRule("logn")
    bootstrap_draws: int = 200
    seed: object = 0
    basis_degree: int = 3
    basis_knots: int = 5

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.bootstrap_draws < 50:
            raise ValueError("need at least 50 bootstrap draws")
        if not conforms_to_assumption1(self.functional):
            raise ValueError(
                "test functional must be positively homogeneous, convex and "
                "Lipschitz; the rearrangement residual is diagnostic only"
            )


def order_statistic(values: np.ndarray, q: float) -> float:
    """ceil(q*B) order statistic (ascending), the right-continuous quantile."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    rank = int(math.ceil(q * v.size))
    rank = min(max(rank, 1), v.size)
    return float(v[rank - 1])


def kappa_hat(ensemble: BootstrapEnsemble, fit_: SeriesFit, gamma: float) -> float:
    """Data-driven tuning r_n * c_n / tau_hat with tau_hat the (1-gamma) sup-norm quantile.

    Returns +inf when the draws are zero at working precision relative to the
    fitted coefficients (degenerate case, e.g. a noiseless sample); the caller
    then runs with kappa = 0. Without the relative floor a residual of pure
    rounding noise would produce an astronomically large kappa.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    tau = order_statistic(ensemble.sup_norms, 1.0 - gamma)
    if tau <= 1e-10 * (1.0 + float(np.max(np.abs(fit_.beta)))):
        return math.inf
    return fit_.r_n * fit_.c_n / tau


def _phi_of_shifted_draws(functional, grid, draws, shift):
    values = np.empty(draws.shape[0])
    failures = 0
    for b in range(draws.shape[0]):
        try:
            values[b] = evaluate(functional, GridFunction(grid, draws[b] + shift))
        except NumericalFailure as exc:
            warnings.warn(f"bootstrap draw {b} failed: {exc}")
            values[b] = np.nan
            failures += 1
    return values, failures


def bootstrap_statistics(
    ensemble: BootstrapEnsemble,
    theta_grid: GridFunction,
    functional: WaldFunctional,
    gamma_op: ShapeOperator,
    kappa: float,
    threads: int = 1,
) -> np.ndarray:
    """phi(draw_b + kappa * Gamma(theta_hat)) for every bootstrap draw.

    Draws whose LP evaluation fails are dropped; more than 1% of failures
    aborts the computation.
    """
    kappa_used = 0.0 if math.isinf(kappa) else kappa
    if kappa_used > 0.0:
        shift = kappa_used * apply(gamma_op, theta_grid).values
    else:
        shift = np.zeros(theta_grid.grid.size)
    draws = ensemble.draws
    if threads > 1 and draws.shape[0] >= 2 * threads:
        chunks = np.array_split(np.arange(draws.shape[0]), threads)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(
                    _phi_worker,
                    [
                        (functional, ensemble.grid, draws[idx], shift)
                        for idx in chunks
                    ],
                )
            )
        values = np.concatenate([p[0] for p in parts])
        failures = sum(p[1] for p in parts)
    else:
        values, failures = _phi_of_shifted_draws(functional, ensemble.grid, draws, shift)
    if failures > _MAX_FAILURE_SHARE * draws.shape[0]:
        raise NumericalFailure(
            f"{failures} of {draws.shape[0]} bootstrap evaluations failed"
        )
    return values[np.isfinite(values)]


def _phi_worker(args):
    return _phi_of_shifted_draws(*args)


def critical_value(
    ensemble: BootstrapEnsemble,
    fit_: SeriesFit,
    functional: WaldFunctional,
    gamma_op: ShapeOperator,
    kappa: float,
    alpha: float,
) -> float:
    """(1 - alpha) empirical quantile of the shifted bootstrap statistics."""
    theta_grid = eval_on_grid(fit_, ensemble.grid)
    values = bootstrap_statistics(ensemble, theta_grid, functional, gamma_op, kappa)
    return order_statistic(values, 1.0 - alpha)


@dataclass
class TestReport:
    """Outcome of one shape test with full provenance."""

    statistic: float
    tau_hat: float
    kappa_hat: float
    critical_value: float
    p_value: float
    reject: bool
    bootstrap_values: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "statistic": self.statistic,
            "tau_hat": self.tau_hat,
            "kappa_hat": self.kappa_hat,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "bootstrap_values": [float(v) for v in self.bootstrap_values],
            "provenance": self.provenance,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)


def run_test(sample: Sample, config: TestConfig, threads: int = 1) -> TestReport:
    """Full pipeline: fit, statistic, bootstrap, tuning, critical value, decision."""

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TestStageError:
            raise
        except Exception as exc:
            raise TestStageError(name, exc) from exc

    basis = stage("build basis", build_basis, config.basis_degree, config.basis_knots, sample.z)
    fit_ = stage("series fit", fit, sample, basis)
    theta_grid = stage("grid evaluation", eval_on_grid, fit_, config.grid)
    statistic = fit_.r_n * stage("test statistic", evaluate, config.functional, theta_grid)
    ensemble = stage(
        "score bootstrap",
        score_bootstrap,
        fit_,
        sample,
        config.grid,
        config.bootstrap_draws,
        config.seed,
    )
    gamma = config.gamma_rule.gamma(sample.n)
    kappa = stage("tuning", kappa_hat, ensemble, fit_, gamma)
    tau = order_statistic(ensemble.sup_norms, 1.0 - gamma)
    values = stage(
        "critical value",
        bootstrap_statistics,
        ensemble,
        theta_grid,
        config.functional,
        config.gamma_op,
        kappa,
        threads,
    )
    cval = order_statistic(values, 1.0 - config.alpha)
    p_value = float(np.mean(values >= statistic))
    report = TestReport(
        statistic=float(statistic),
        tau_hat=float(tau),
        kappa_hat=float(kappa),
        critical_value=float(cval),
        p_value=p_value,
        reject=bool(statistic > cval),
        bootstrap_values=values,
        provenance={
            "alpha": config.alpha,
            "gamma_rule": config.gamma_rule.label,
            "gamma_n": gamma,
            "bootstrap_draws": config.bootstrap_draws,
            "seed": config.seed,
            "basis_degree": config.basis_degree,
            "basis_knots": config.basis_knots,
            "k_n": fit_.k_n,
            "r_n": fit_.r_n,
            "c_n": fit_.c_n,
            "n": sample.n,
            "grid_shape": list(config.grid.shape),
            "functional": type(config.functional).__name__,
            "gamma_op": config.gamma_op.kind,
        },
    )
    return report


def theorem1_harness(design, config: TestConfig, n_reps: int, seed: object = 0, threads: int = 1):
    """Monte Carlo rejection frequency (with binomial SE) for one design/config cell."""
    from . import simulation

    shape = getattr(config.functional, "shape", None)
    restriction = shape.restriction if shape is not None else (
        "convex" if config.functional.op.kind == "gcm" else "concave"
    )
    cell = simulation.McCell(
        design=design,
        restriction=restriction,
        basis_degree=config.basis_degree,
        basis_knots=config.basis_knots,
    )
    results = simulation.run_mc(
        [cell],
        reps=n_reps,
        bootstrap_draws=config.bootstrap_draws,
        alpha=config.alpha,
        gamma_rules=[config.gamma_rule],
        grid_points=config.grid.shape[0],
        seed=seed,
        threads=threads,
    )
    return results[0]
