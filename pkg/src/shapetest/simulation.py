"""Monte Carlo designs and the size/power experiment runner.

Five regression-function families are built in: two univariate families on
[-1, 1], their sign-flipped variant used for curvature alternatives, and two
bivariate CES-plus-log families on [0, 1]^2. Covariates are probit transforms
of standard normals (hence uniform on the domain) and errors are standard
normal. Replications get deterministic substreams derived from
(master seed, replication index), so cells sharing a master seed see the same
samples and results aggregate independently of scheduling order.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from io import StringIO

import numpy as np
from scipy.stats import norm as _normal

from .estimation import Sample, eval_on_grid, fit, score_bootstrap
from .functionals import ShapeSpec, evaluate, functional_for_shape
from .grids import Grid
from .inference import GammaRule, bootstrap_statistics, kappa_hat, order_statistic
from .splines import build_basis

FAMILIES = ("uni1", "uni2", "uni2c", "bi1", "bi2")

# null parameter triples (a, b, c) from the published designs
UNI_NULLS = {"D1": (0.0, 0.0, 0.0), "D2": (0.1, 0.5, 0.5), "D3": (0.5, 2.0, 1.0)}
BI_NULLS = {"D1": (0.0, 0.0, 0.0), "D2": (0.2, 1.0, 0.0), "D3": (0.5, 0.0, 0.5)}

# default per-axis reporting-grid sizes for the simulation harness
DEFAULT_GRID_UNI = 101
DEFAULT_GRID_BI = 11

_MAX_FAILURE_SHARE = 0.02


@dataclass(frozen=True)
class Design:
    """One data-generating process: family, parameters (a, b, c), sample size."""

    family: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    n: int = 500
    delta: float | None = None  # set for alternatives, for power-curve output

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown design family {self.family!r}")
        if self.n < 1:
            raise ValueError("sample size must be positive")

    @property
    def dim(self) -> int:
        return 2 if self.family.startswith("bi") else 1

    @property
    def domain(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.dim == 2 else (-1.0, 1.0)

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


def _phi_pdf(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / math.sqrt(2.0 * math.pi)


def _ces(a, b, z1, z2):
    if b == 0.0:
        return a * np.sqrt(z1 * z2)
    return a * (0.5 * z1**b + 0.5 * z2**b) ** (1.0 / b)


def theta0(design: Design, z) -> np.ndarray:
    """The regression function of a design evaluated at points z."""
    z = np.asarray(z, dtype=np.float64)
    if design.dim == 1:
        zz = z.ravel()
        lo, hi = design.domain
        if np.any(zz < lo - 1e-12) or np.any(zz > hi + 1e-12):
            raise ValueError(f"points outside the design domain [{lo}, {hi}]")
        if design.family == "uni1":
            return design.a * zz - design.b * _phi_pdf(design.c * zz)
        if design.family == "uni2":
            return -design.b * _phi_pdf(np.abs(zz) ** 1.5)
        return design.b * _phi_pdf(np.abs(zz) ** 1.5)  # uni2c
    pts = z if z.ndim == 2 else z.reshape(-1, 2)
    if np.any(pts < -1e-12) or np.any(pts > 1.0 + 1e-12):
        raise ValueError("points outside the design domain [0, 1]^2")
    z1, z2 = np.clip(pts[:, 0], 0.0, 1.0), np.clip(pts[:, 1], 0.0, 1.0)
    ces = _ces(design.a, design.b, z1, z2)
    if design.family == "bi1":
        return ces + design.c * np.log1p(z1 + z2)
    return ces + design.c * np.log1p(5.0 * (z1 + z2))  # bi2


def null_design(family: str, label: str, n: int = 500) -> Design:
    table = BI_NULLS if family.startswith("bi") else UNI_NULLS
    a, b, c = table[label]
    return Design(family=family, a=a, b=b, c=c, n=n)


def alternative_design(
    family: str, delta: float, n: int = 500, restriction: str = "monotone"
) -> Design:
    """The published alternative indexed by delta for a family.

    uni1/bi1 tilt and bump the curve with a = c = -Delta*delta, b = 0.2*delta
    (Delta = 0.05); bi2 uses Delta = 0.2. For curvature tests the uni1 bump
    flips sign (b = -0.2*delta), since the downward bump is itself convex and
    would stay inside the null.
    """
    if delta == 0:
        return replace(null_design(family, "D1", n), delta=0.0)
    if family == "uni1":
        b = 0.2 * delta
        if "convex" in restriction or "concave" in restriction:
            b = -b
        return Design(family, a=-0.05 * delta, b=b, c=-0.05 * delta, n=n, delta=delta)
    if family in ("uni2", "uni2c"):
        return Design(family, b=0.5 * delta, n=n, delta=delta)
    if family == "bi1":
        return Design(family, a=-0.05 * delta, b=0.2 * delta, c=-0.05 * delta, n=n, delta=delta)
    return Design(family, a=-0.2 * delta, b=0.2 * delta, c=-0.2 * delta, n=n, delta=delta)


def draw_sample(design: Design, n: int | None = None, seed=0) -> Sample:
    """Draw a sample: probit-transformed uniform covariates, N(0,1) errors."""
    n = design.n if n is None else n
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    zstar = rng.standard_normal((n, design.dim))
    u = rng.standard_normal(n)
    if design.dim == 1:
        z = -1.0 + 2.0 * _normal.cdf(zstar[:, 0])
    else:
        z = _normal.cdf(zstar)
    y = theta0(design, z) + u
    return Sample(y=y, z=z)


@dataclass(frozen=True)
class McCell:
    """One Monte Carlo cell: a design, a restriction to test, and a sieve."""

    design: Design
    restriction: str
    basis_degree: int = 3
    basis_knots: int = 5

    @property
    def basis_label(self) -> str:
        stem = "cubic" if self.basis_degree == 3 else "quad"
        return f"{stem}{self.basis_knots}"


@dataclass
class McResult:
    """Rejection frequency for one (cell, gamma rule) combination."""

    family: str
    params: tuple[float, float, float]
    n: int
    basis: str
    gamma_rule: str
    alpha: float
    reps: int
    reject_rate: float
    se: float
    runtime_ms: float | None = None
    delta: float | None = None
    restriction: str | None = None


def resolve_threads(requested=None) -> int:
    """--threads flag, else SHAPETEST_THREADS, else all cores."""
    if requested:
        return max(1, int(requested))
    env = os.environ.get("SHAPETEST_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def default_grid(design: Design, grid_points: int | None = None) -> Grid:
    npts = grid_points or (DEFAULT_GRID_BI if design.dim == 2 else DEFAULT_GRID_UNI)
    lo, hi = design.domain
    return Grid.uniform(npts, lo, hi, dim=design.dim)


def _replicate(cell, grid, functional, gamma_op, draws, alpha, rules, master_seed, rep):
    """One replication; returns reject decisions keyed by gamma-rule label."""
    sample = draw_sample(cell.design, seed=(master_seed, rep))
    basis = build_basis(cell.basis_degree, cell.basis_knots, sample.z)
    fit_ = fit(sample, basis)
    theta_grid = eval_on_grid(fit_, grid)
    statistic = fit_.r_n * evaluate(functional, theta_grid)
    ensemble = score_bootstrap(fit_, sample, grid, draws, seed=(master_seed, rep, 1))
    decisions = {}
    cvals: dict[float, float] = {}
    for rule in rules:
        kappa = kappa_hat(ensemble, fit_, rule.gamma(sample.n))
        key = 0.0 if math.isinf(kappa) else kappa
        if key not in cvals:
            values = bootstrap_statistics(ensemble, theta_grid, functional, gamma_op, kappa)
            cvals[key] = order_statistic(values, 1.0 - alpha)
        decisions[rule.label] = bool(statistic > cvals[key])
    return decisions


def _mc_task(args):
    """Worker: run a block of replications for one cell."""
    cell, reps_block, draws, alpha, rules, grid_points, master_seed = args
    grid = default_grid(cell.design, grid_points)
    shape = ShapeSpec(cell.restriction, cell.design.dim)
    functional = functional_for_shape(shape)
    gamma_op = shape.gamma_operator()
    counts = {rule.label: 0 for rule in rules}
    done = 0
    failures = 0
    t0 = time.perf_counter()
    for rep in reps_block:
        try:
            decisions = _replicate(
                cell, grid, functional, gamma_op, draws, alpha, rules, master_seed, rep
            )
        except Exception as exc:
            warnings.warn(f"replication {rep} failed: {exc}")
            failures += 1
            continue
        done += 1
        for label, reject in decisions.items():
            counts[label] += int(reject)
    return counts, done, failures, time.perf_counter() - t0


def run_mc(
    cells,
    *,
    reps: int,
    bootstrap_draws: int = 200,
    alpha: float = 0.05,
    gamma_rules=None,
    grid_points: int | None = None,
    seed=0,
    threads: int | None = None,
) -> list[McResult]:
    """Monte Carlo over cells; one McResult per (cell, gamma rule).

    Replications are split into blocks and dispatched to worker processes;
    aggregation is a sum of counts and therefore order-independent. A cell
    with more than 2% failed replications raises.
    """
    if reps < 50:
        raise ValueError("need at least 50 replications per cell")
    rules = list(gamma_rules) if gamma_rules else [GammaRule("logn")]
    nworkers = resolve_threads(threads)
    block = max(1, math.ceil(reps / (nworkers * 4)))
    tasks = []
    for ci, cell in enumerate(cells):
        for start in range(0, reps, block):
            reps_block = range(start, min(start + block, reps))
            tasks.append(
                (ci, (cell, reps_block, bootstrap_draws, alpha, rules, grid_points, seed))
            )

    outcomes = {ci: {"counts": {r.label: 0 for r in rules}, "done": 0, "failures": 0, "secs": 0.0} for ci in range(len(cells))}
    if nworkers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            for (ci, _), result in zip(tasks, pool.map(_mc_task, [t[1] for t in tasks])):
                _accumulate(outcomes[ci], result)
    else:
        for ci, payload in tasks:
            _accumulate(outcomes[ci], _mc_task(payload))

    results = []
    for ci, cell in enumerate(cells):
        out = outcomes[ci]
        if out["failures"] > _MAX_FAILURE_SHARE * reps:
            raise RuntimeError(
                f"cell {cell.basis_label}/{cell.design.family}: "
                f"{out['failures']} of {reps} replications failed"
            )
        done = out["done"]
        for rule in rules:
            rate = out["counts"][rule.label] / done
            results.append(
                McResult(
                    family=cell.design.family,
                    params=cell.design.params,
                    n=cell.design.n,
                    basis=cell.basis_label,
                    gamma_rule=rule.label,
                    alpha=alpha,
                    reps=done,
                    reject_rate=rate,
                    se=math.sqrt(rate * (1.0 - rate) / done),
                    runtime_ms=1000.0 * out["secs"],
                    delta=cell.design.delta,
                    restriction=cell.restriction,
                )
            )
    return results


def _accumulate(slot, result):
    counts, done, failures, secs = result
    for label, cnt in counts.items():
        slot["counts"][label] += cnt
    slot["done"] += done
    slot["failures"] += failures
    slot["secs"] += secs


CSV_COLUMNS = (
    "family",
    "params",
    "n",
    "basis",
    "gamma_rule",
    "alpha",
    "reps",
    "reject_rate",
    "se",
    "runtime_ms",
)


def results_to_csv(results, *, power: bool = False, timings: bool = False) -> str:
    """Render results as CSV; power tables get a leading delta column.

    Runtime is left blank unless ``timings`` is requested so that fixed-seed
    runs are byte-identical.
    """
    buf = StringIO()
    header = ("delta",) + CSV_COLUMNS if power else CSV_COLUMNS
    buf.write(",".join(header) + "\n")
    for r in results:
        row = [
            r.family,
            "{:g}|{:g}|{:g}".format(*r.params),
            str(r.n),
            r.basis,
            r.gamma_rule,
            f"{r.alpha:g}",
            str(r.reps),
            f"{r.reject_rate:.6f}",
            f"{r.se:.6f}",
            f"{r.runtime_ms:.0f}" if (timings and r.runtime_ms is not None) else "",
        ]
        if power:
            row.insert(0, "" if r.delta is None else f"{r.delta:g}")
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_hours_fixture(path, n: int = 1911, seed=0, slope: float = 0.5, flip: bool = False):
    """Synthetic wage-growth dataset matching the empirical workflow's schema.

    Columns y, z1, w1, w2, w3: outcome is an increasing convex function of
    weekly hours z1 in [3, 90] plus linear demographic controls and noise.
    ``flip`` negates the hours profile, producing a decreasing curve.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    hours = rng.integers(3, 91, size=n).astype(float)
    exper = rng.uniform(0.0, 20.0, size=n)
    educ = rng.integers(12, 21, size=n).astype(float)
    female = rng.integers(0, 2, size=n).astype(float)
    profile = 0.15 + slope * ((hours - 3.0) / 87.0) ** 2
    if flip:
        profile = -profile
    y = profile + 0.01 * exper + 0.005 * educ - 0.03 * female
    y = y + 0.25 * rng.standard_normal(n)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("y,z1,w1,w2,w3\n")
        for i in range(n):
            fh.write(
                f"{y[i]:.6f},{hours[i]:g},{exper[i]:.6f},{educ[i]:g},{female[i]:g}\n"
            )
    return path
