"""Test engine: tuning arithmetic, quantile conventions, full pipeline behavior."""

import math

import numpy as np
import pytest

from shapetest.estimation import BootstrapEnsemble, Sample, SeriesFit, fit, score_bootstrap
from shapetest.functionals import ConeDistance, ShapeSpec
from shapetest.grids import Grid
from shapetest.inference import (
    GammaRule,
    TestConfig,
    TestStageError,
    critical_value,
    kappa_hat,
    order_statistic,
    run_test,
)
from shapetest.splines import build_basis


def fit_with(n, k_target_knots=5, seed=0):
    rng = np.random.default_rng(seed)
    z = -1 + 2 * rng.uniform(size=n)
    y = rng.standard_normal(n)
    basis = build_basis(3, k_target_knots, z)
    return Sample(y=y, z=z), fit(Sample(y=y, z=z), basis)


def ensemble_with_sup_norms(sups):
    sups = np.asarray(sups, dtype=float)
    grid = Grid.uniform(3)
    draws = np.zeros((sups.size, 3))
    draws[:, 0] = sups
    return BootstrapEnsemble(grid=grid, draws=draws)


class TestGammaRule:
    def test_parse(self):
        assert GammaRule.parse("logn").kind == "logn"
        assert GammaRule.parse("invn").kind == "invn"
        rule = GammaRule.parse("fixed:0.01")
        assert rule.kind == "fixed" and rule.value == 0.01
        with pytest.raises(ValueError):
            GammaRule.parse("whenever")

    def test_values(self):
        assert GammaRule("logn").gamma(1000) == pytest.approx(0.01 / math.log(1000))
        assert GammaRule("invn").gamma(400) == pytest.approx(1 / 400)
        assert GammaRule("fixed", 0.02).gamma(10**6) == 0.02


class TestOrderStatistic:
    def test_quantile_convention(self):
        # ceil(0.75 * 4) = 3rd order statistic
        assert order_statistic(np.array([1.0, 2.0, 3.0, 4.0]), 0.75) == 3.0

    def test_max_at_one(self):
        assert order_statistic(np.array([5.0, 1.0, 2.0]), 1.0) == 5.0


class TestKappaHat:
    def test_table_note_arithmetic(self):
        # r_n = sqrt(1000/9), c_n = 1/log(1000), tau = 2
        _, f = fit_with(1000)
        assert f.k_n == 9
        ens = ensemble_with_sup_norms(np.full(100, 2.0))
        got = kappa_hat(ens, f, gamma=0.1)
        expected = math.sqrt(1000 / 9) * (1 / math.log(1000)) / 2.0
        assert got == pytest.approx(expected, abs=1e-9)
        assert got == pytest.approx(0.76297, abs=1e-5)  # reference value, 5 decimals

    def test_degenerate_all_zero(self):
        _, f = fit_with(200)
        ens = ensemble_with_sup_norms(np.zeros(60))
        assert math.isinf(kappa_hat(ens, f, gamma=0.1))

    def test_tau_quantile_convention(self):
        _, f = fit_with(200)
        ens = ensemble_with_sup_norms([1.0, 2.0, 3.0, 4.0])
        got = kappa_hat(ens, f, gamma=0.25)
        assert got == pytest.approx(f.r_n * f.c_n / 3.0)

    def test_kappa_decreases_as_gamma_shrinks(self):
        rng = np.random.default_rng(0)
        _, f = fit_with(500)
        ens = ensemble_with_sup_norms(rng.uniform(0.5, 3.0, size=200))
        kappas = [kappa_hat(ens, f, g) for g in (0.2, 0.1, 0.02, 0.005)]
        assert all(b <= a + 1e-12 for a, b in zip(kappas, kappas[1:]))


class TestCriticalValue:
    def setup_pieces(self):
        sample, f = fit_with(300, seed=3)
        grid = Grid.uniform(21, -1, 1)
        ens = score_bootstrap(f, sample, grid, 80, seed=4)
        phi = ConeDistance(ShapeSpec("monotone", 1))
        gamma_op = ShapeSpec("monotone", 1).gamma_operator()
        return f, ens, phi, gamma_op

    def test_kappa_zero_matches_plain_quantile(self):
        f, ens, phi, gamma_op = self.setup_pieces()
        from shapetest.grids import GridFunction

        direct = [
            phi.evaluate(GridFunction(ens.grid, ens.draws[b]))
            for b in range(ens.n_draws)
        ]
        got = critical_value(ens, f, phi, gamma_op, kappa=0.0, alpha=0.1)
        assert got == pytest.approx(order_statistic(np.array(direct), 0.9), abs=1e-12)

    def test_weakly_decreasing_in_alpha(self):
        f, ens, phi, gamma_op = self.setup_pieces()
        values = [
            critical_value(ens, f, phi, gamma_op, kappa=0.3, alpha=a)
            for a in (0.01, 0.05, 0.1, 0.25, 0.5)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_quantile_convention_on_known_values(self):
        # with alpha = 0.25 the critical value is the 3rd of 4 sorted values
        assert order_statistic(np.array([4.0, 1.0, 3.0, 2.0]), 0.75) == 3.0


def monotone_config(grid_n=41, **kw):
    shape = ShapeSpec("monotone", 1)
    defaults = dict(
        functional=ConeDistance(shape),
        gamma_op=shape.gamma_operator(),
        grid=Grid.uniform(grid_n, -1, 1),
        alpha=0.05,
        bootstrap_draws=100,
        seed=7,
        basis_knots=3,
    )
    defaults.update(kw)
    return TestConfig(**defaults)


class TestConfigValidation:
    def test_alpha_range(self):
        with pytest.raises(ValueError):
            monotone_config(alpha=1.2)

    def test_min_bootstrap(self):
        with pytest.raises(ValueError):
            monotone_config(bootstrap_draws=10)

    def test_nonconforming_functional_rejected(self):
        from shapetest.functionals import OperatorResidual
        from shapetest.operators import ShapeOperator

        with pytest.raises(ValueError):
            monotone_config(functional=OperatorResidual(ShapeOperator.rearrangement()))


class TestRunTest:
    def test_noiseless_monotone_never_rejects(self):
        z = np.linspace(-1, 1, 120)
        sample = Sample(y=z.copy(), z=z)  # exact linear, zero noise
        report = run_test(sample, monotone_config())
        assert report.statistic == pytest.approx(0.0, abs=1e-8)
        assert math.isinf(report.kappa_hat)  # degenerate bootstrap sentinel
        assert report.reject is False

    def test_null_data_usually_accepts(self):
        rng = np.random.default_rng(1)
        z = -1 + 2 * rng.uniform(size=500)
        y = 0.5 * z + rng.standard_normal(500)
        report = run_test(Sample(y=y, z=z), monotone_config())
        assert report.reject is False
        assert report.p_value > 0.1

    def test_strong_alternative_rejects(self):
        rng = np.random.default_rng(2)
        z = -1 + 2 * rng.uniform(size=800)
        y = -2.0 * z + 0.4 * rng.standard_normal(800)
        report = run_test(Sample(y=y, z=z), monotone_config())
        assert report.reject is True
        assert report.p_value < 0.05

    def test_reports_are_reproducible(self):
        rng = np.random.default_rng(3)
        z = -1 + 2 * rng.uniform(size=300)
        y = rng.standard_normal(300)
        r1 = run_test(Sample(y=y, z=z), monotone_config())
        r2 = run_test(Sample(y=y, z=z), monotone_config())
        assert r1.to_json() == r2.to_json()

    def test_p_value_reject_consistency(self):
        rng = np.random.default_rng(4)
        for seed in range(6):
            rng = np.random.default_rng(seed)
            z = -1 + 2 * rng.uniform(size=250)
            slope = rng.choice([-1.5, 0.0, 1.0])
            y = slope * z + rng.standard_normal(250)
            report = run_test(Sample(y=y, z=z), monotone_config())
            if report.p_value < report.provenance["alpha"]:
                assert report.reject
            if report.reject:
                assert report.p_value <= report.provenance["alpha"]

    def test_scale_equivariance_fixed_kappa(self):
        # with kappa held fixed, statistic and critical value both scale by c
        sample, f = fit_with(300, seed=9)
        grid = Grid.uniform(21, -1, 1)
        phi = ConeDistance(ShapeSpec("monotone", 1))
        gamma_op = ShapeSpec("monotone", 1).gamma_operator()
        ens = score_bootstrap(f, sample, grid, 60, seed=11)
        base = critical_value(ens, f, phi, gamma_op, kappa=0.0, alpha=0.1)
        c = 3.0
        scaled_fit = SeriesFit(
            basis=f.basis,
            beta=c * f.beta,
            gamma=None,
            residuals=c * f.residuals,
            gram_inverse=f.gram_inverse,
            n=f.n,
        )
        scaled_ens = score_bootstrap(scaled_fit, sample, grid, 60, seed=11)
        scaled = critical_value(scaled_ens, scaled_fit, phi, gamma_op, kappa=0.0, alpha=0.1)
        assert scaled == pytest.approx(c * base, rel=1e-9)

    def test_scale_leaves_decision_unchanged(self):
        rng = np.random.default_rng(5)
        z = -1 + 2 * rng.uniform(size=400)
        for slope in (-1.5, 1.0):
            y = slope * z + 0.5 * rng.standard_normal(400)
            base = run_test(Sample(y=y, z=z), monotone_config())
            for c in (0.5, 2.0):
                scaled = run_test(Sample(y=c * y, z=z), monotone_config())
                assert scaled.reject == base.reject

    def test_stage_labels_on_errors(self):
        bad = Sample(y=np.zeros(6), z=np.linspace(-1, 1, 6))
        with pytest.raises(TestStageError) as err:
            run_test(bad, monotone_config())
        assert err.value.stage in ("build basis", "series fit")

    def test_report_schema(self):
        rng = np.random.default_rng(6)
        z = -1 + 2 * rng.uniform(size=200)
        y = rng.standard_normal(200)
        report = run_test(Sample(y=y, z=z), monotone_config())
        doc = report.to_dict()
        assert doc["schema"] == "shapetest-report/1"
        for key in ("statistic", "kappa_hat", "tau_hat", "critical_value", "p_value", "reject"):
            assert key in doc
        assert doc["provenance"]["seed"] == 7
        assert len(doc["bootstrap_values"]) == 100
