import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from stockvolve import kinetics
from stockvolve.errors import DegenerateCurves, NoIntersection
from stockvolve.grid import PriceGrid
from stockvolve.price_dist import (
    CurvePair,
    LogisticPriceModel,
    build_curves,
    intersection_price,
    intersection_price_from_units,
    kl_logistic_laplace,
    laplace_pdf,
    logistic_cdf,
    logistic_pdf,
    logistic_variance,
    mean_price_shift,
    purchase_density,
    sample_laplace,
    sample_logistic,
)

# frozen by 50-digit evaluation of the cdf at mu=100, mu_m=1, eps=0.01, p=120
CDF_AT_120 = 0.7167316945115957


class TestModel:
    def test_derived_quantities(self, canonical_model):
        m = canonical_model
        assert m.Q == pytest.approx(1.0 / np.log(99.0), rel=1e-15)
        assert m.Q_prime == pytest.approx(m.Q * 99.0, rel=1e-15)
        assert m.q == pytest.approx(m.Q * np.pi / np.sqrt(6.0), rel=1e-15)
        assert m.sigma == pytest.approx(np.sqrt(2.0) * m.q * 100.0, rel=1e-15)

    @pytest.mark.parametrize("kwargs", [
        dict(mu=100.0, mu_m=1.0, eps=0.5),     # Q diverges at eps=1/2
        dict(mu=100.0, mu_m=1.0, eps=0.0),
        dict(mu=100.0, mu_m=100.0, eps=0.01),  # mu_m must stay below mu
        dict(mu=100.0, mu_m=-1.0, eps=0.01),
        dict(mu=0.0, mu_m=0.0, eps=0.01),
    ])
    def test_domain_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LogisticPriceModel(**kwargs)

    def test_mass_below_zero_is_bounded_by_eps(self, canonical_model):
        assert 0.0 < canonical_model.mass_below_zero() < canonical_model.eps


class TestLogisticCdf:
    def test_half_at_mean(self, canonical_model):
        assert logistic_cdf(100.0, canonical_model) == 0.5

    def test_cutoff_probability_at_lowest_price(self, canonical_model):
        assert logistic_cdf(1.0, canonical_model) == pytest.approx(0.01,
                                                                   abs=1e-12)

    def test_frozen_high_precision_point(self, canonical_model):
        assert logistic_cdf(120.0, canonical_model) == pytest.approx(
            CDF_AT_120, rel=1e-14)

    def test_strictly_increasing(self, canonical_model):
        p = np.linspace(0.0, 400.0, 512)
        assert np.all(np.diff(logistic_cdf(p, canonical_model)) > 0)


class TestLogisticPdf:
    def test_peak_value(self, canonical_model):
        m = canonical_model
        assert logistic_pdf(m.mu, m) == pytest.approx(
            1.0 / (4.0 * m.Q * (m.mu - m.mu_m)), rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(x=st.floats(0.0, 500.0))
    def test_symmetry(self, x):
        m = LogisticPriceModel(mu=100.0, mu_m=1.0, eps=0.01)
        assert logistic_pdf(m.mu + x, m) == pytest.approx(
            logistic_pdf(m.mu - x, m), rel=1e-13)

    def test_integrates_to_one(self, canonical_model):
        m = canonical_model
        span = 30.0 * m.sigma
        val, _ = integrate.quad(lambda p: logistic_pdf(p, m),
                                m.mu - span, m.mu + span, points=[m.mu],
                                limit=300)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_matches_cdf_derivative(self, canonical_model):
        m = canonical_model
        h = 1e-5
        for p in (40.0, 100.0, 210.0):
            numeric = (logistic_cdf(p + h, m) - logistic_cdf(p - h, m)) / (2 * h)
            assert logistic_pdf(p, m) == pytest.approx(numeric, rel=1e-8)


class TestVariance:
    def test_unit_shape_closed_form(self):
        # Q = 1 needs eps = 1/(1+e); with mu - mu_m = 1 the variance is pi^2/3
        eps = 1.0 / (1.0 + np.e)
        m = LogisticPriceModel(mu=2.0, mu_m=1.0, eps=eps)
        assert m.Q == pytest.approx(1.0, rel=1e-14)
        assert logistic_variance(m) == pytest.approx(np.pi**2 / 3.0, rel=1e-14)

    def test_quadrature_agreement(self, canonical_model):
        m = canonical_model
        span = 40.0 * m.sigma
        val, _ = integrate.quad(lambda p: (p - m.mu) ** 2 * logistic_pdf(p, m),
                                m.mu - span, m.mu + span, points=[m.mu],
                                limit=400)
        assert val == pytest.approx(logistic_variance(m), rel=1e-6)

    def test_monte_carlo_agreement(self, canonical_model, rng):
        samples = sample_logistic(canonical_model, 1_000_000, rng)
        assert samples.var() == pytest.approx(logistic_variance(canonical_model),
                                              rel=0.01)


class TestLaplace:
    def test_peak(self):
        assert laplace_pdf(100.0, 100.0, 0.2) == pytest.approx(1.0 / 40.0)

    def test_integrates_to_one(self):
        val, _ = integrate.quad(lambda p: laplace_pdf(p, 100.0, 0.2),
                                -np.inf, np.inf, points=None)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_sample_standard_deviation(self, canonical_model, rng):
        m = canonical_model
        samples = sample_laplace(m.mu, m.q, 1_000_000, rng)
        assert samples.std() == pytest.approx(m.sigma, rel=0.01)

    def test_kl_to_logistic_is_small_and_reported(self, canonical_model):
        kl = kl_logistic_laplace(canonical_model)
        assert 0.0 < kl < 0.2


class TestCurves:
    def test_limits(self, tight_model, wide_grid):
        curves = build_curves(tight_model, 1e6, 2e6, wide_grid)
        assert curves.demand_units[0] == pytest.approx(1e6, rel=1e-6)
        assert curves.supply_units[0] <= 2e6 * 1e-6
        assert curves.demand_units[-1] <= 1e6 * 1e-6
        assert curves.supply_units[-1] == pytest.approx(2e6, rel=1e-6)

    def test_monotonicity(self, tight_model, wide_grid):
        curves = build_curves(tight_model, 1e6, 1e6, wide_grid)
        assert np.all(np.diff(curves.demand_units) <= 0)
        assert np.all(np.diff(curves.supply_units) >= 0)

    def test_narrow_grid_rejected(self, canonical_model):
        # canonical tails put ~1% of mass below p=0: curves cannot span [0,1]
        grid = PriceGrid(0.0, 400.0, 512)
        with pytest.raises(ValueError, match="widen the grid|run from"):
            build_curves(canonical_model, 1e6, 1e6, grid)

    def test_totals_must_be_positive(self, tight_model, wide_grid):
        with pytest.raises(ValueError):
            build_curves(tight_model, 0.0, 1e6, wide_grid)


class TestPurchaseDensity:
    def test_overlap_integral_equals_scale(self):
        # thin tails keep the whole overlap inside the grid
        m = LogisticPriceModel(mu=100.0, mu_m=1.0, eps=1e-10)
        grid = PriceGrid(0.0, 260.0, 40001)
        curves = build_curves(m, 1e6, 1e6, grid)
        _, T = purchase_density(curves)
        assert T / m.Q_prime == pytest.approx(1.0, abs=1e-9)

    def test_density_normalized_on_grid(self, tight_model, wide_grid):
        curves = build_curves(tight_model, 1e6, 1e6, wide_grid)
        density, _ = purchase_density(curves)
        assert np.trapezoid(density, wide_grid.points) == pytest.approx(
            1.0, abs=1e-8)

    def test_symmetric_about_mean(self):
        m = LogisticPriceModel(mu=100.0, mu_m=1.0, eps=1e-8)
        grid = PriceGrid(0.0, 200.0, 4001)  # symmetric about mu
        curves = build_curves(m, 1e6, 1e6, grid)
        density, _ = purchase_density(curves)
        assert np.max(np.abs(density - density[::-1])) <= 1e-10

    def test_shifted_supply_moves_peak_half_way(self):
        m = LogisticPriceModel(mu=100.0, mu_m=1.0, eps=1e-8)
        grid = PriceGrid(0.0, 220.0, 22001)
        delta = 8.0
        F = logistic_cdf(grid.points, m)
        F_shifted = logistic_cdf(grid.points - delta, m)
        curves = CurvePair(grid=grid, F_z=F_shifted, F_n=F,
                           n_total=1e6, z_total=1e6)
        density, _ = purchase_density(curves)
        peak = grid.points[int(np.argmax(density))]
        # independent oracle: continuous maximization of F(p-d)(1-F(p))
        res = optimize.minimize_scalar(
            lambda p: -logistic_cdf(p - delta, m) * (1 - logistic_cdf(p, m)),
            bounds=(50.0, 150.0), method="bounded",
            options={"xatol": 1e-10})
        assert res.x == pytest.approx(m.mu + delta / 2.0, abs=1e-6)
        assert abs(peak - res.x) <= grid.dp

    def test_zero_overlap_is_degenerate(self):
        grid = PriceGrid(0.0, 200.0, 64)
        F_step = (grid.points > 100.0).astype(float)
        curves = CurvePair(grid=grid, F_z=F_step, F_n=F_step,
                           n_total=1.0, z_total=1.0)
        with pytest.raises(DegenerateCurves):
            purchase_density(curves)


class TestIntersection:
    def test_symmetric_totals_cross_at_mean(self, tight_model, wide_grid):
        curves = build_curves(tight_model, 1e6, 1e6, wide_grid)
        assert intersection_price(curves) == pytest.approx(
            tight_model.mu, abs=wide_grid.dp)

    @pytest.mark.parametrize("ratio", [2.0, 3.0])
    def test_asymmetric_totals(self, tight_model, wide_grid, ratio):
        curves = build_curves(tight_model, ratio * 1e6, 1e6, wide_grid)
        expected = tight_model.mu + tight_model.Q_prime * np.log(ratio)
        assert intersection_price(curves) == pytest.approx(
            expected, abs=0.5 * wide_grid.dp)

    def test_no_crossing(self):
        p = np.linspace(0.0, 10.0, 64)
        with pytest.raises(NoIntersection):
            intersection_price_from_units(p, np.zeros(64), np.linspace(0, 1, 64))


class TestMeanPriceShift:
    def test_balanced_perturbation(self):
        assert mean_price_shift(3.0, 3.0, 1000.0, 0.2, 100.0) == 0.0

    def test_linear_response(self):
        assert mean_price_shift(5.0, 0.0, 1000.0, 0.2, 100.0) == pytest.approx(0.2)

    def test_requires_positive_totals(self):
        with pytest.raises(ValueError):
            mean_price_shift(1.0, 0.0, 0.0, 0.2, 100.0)

    def test_end_to_end_against_relaxed_kinetics(self, tight_model):
        # demand shock dn/n_total = 1e-3, re-relaxed, re-intersected
        m = tight_model
        grid = PriceGrid(0.0, 300.0, 4096)
        curves = build_curves(m, 1e6, 1e6, grid)
        n, z = curves.demand_units, curves.supply_units
        base = intersection_price_from_units(grid.points, n, z)

        epsilon = 1e-3
        n_shocked = n * (1.0 + epsilon)
        rates = 1.0 * n_shocked * z
        state = kinetics.MarketState(grid=grid, n=n_shocked, z=z,
                                     demand_rate=rates, supply_rate=rates,
                                     eta=1.0)
        relaxed = kinetics.relax(state, tol=1e-10)
        shifted = intersection_price_from_units(grid.points, relaxed.n,
                                                relaxed.z)
        measured = shifted - base
        predicted = mean_price_shift(epsilon * 1e6 / 2.0, 0.0, 1e6, m.Q, m.mu)
        assert measured == pytest.approx(predicted, rel=0.05)
