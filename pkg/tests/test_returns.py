import io
import math

import numpy as np
import pytest
from scipy import integrate, stats

from stockvolve.errors import (
    InvalidParameters,
    NonPositivePrice,
    TooFewDistinctReturns,
    TooFewObservations,
)
from stockvolve.returns import (
    GED,
    FAMILIES,
    GaussLaplaceSum,
    Hyperbolic,
    KanjiMixture,
    Laplace,
    Normal,
    ReturnSeries,
    binned_density,
    fit_mle,
    laplace_convolution_gap,
    laplace_self_convolution,
    log_returns,
    make_distribution,
    read_returns_csv,
    unconditional_price_density,
    write_returns_csv,
)


class TestLogReturns:
    def test_constant_prices(self):
        series = log_returns([5.0] * 10)
        assert np.all(series.values == 0.0)

    def test_single_step(self):
        series = log_returns([100.0, 101.0])
        assert series.values[0] == pytest.approx(math.log(1.01))

    def test_doubling(self):
        series = log_returns(2.0 ** np.arange(12))
        np.testing.assert_allclose(series.values, math.log(2.0), rtol=1e-14)

    def test_multi_step(self):
        series = log_returns(2.0 ** np.arange(12), step=3)
        np.testing.assert_allclose(series.values, 3 * math.log(2.0), rtol=1e-14)
        assert len(series) == 9

    def test_nonpositive_price(self):
        with pytest.raises(NonPositivePrice):
            log_returns([1.0, 0.0, 2.0])

    def test_series_validation(self):
        with pytest.raises(ValueError):
            ReturnSeries(timestamps=[0.0, 0.0], values=[0.1, 0.2])
        with pytest.raises(ValueError):
            ReturnSeries(timestamps=[0.0, 1.0], values=[0.1, np.inf])


def _quad_unit_mass(dist, tol):
    span = 40.0 * dist.std()
    val, _ = integrate.quad(dist.pdf, -span, span, points=[0.0], limit=400)
    assert val == pytest.approx(1.0, abs=tol), dist


class TestDensities:
    @pytest.mark.parametrize("dist", [
        Normal(rho=0.001, omega=0.02),
        Laplace(q=0.015),
        GED(lam=1.3, scale=0.01),
        GED(lam=0.8, scale=2.0),
        Hyperbolic(lam=0.5, chi=0.0),
        Hyperbolic(lam=0.7, chi=0.3),
        Hyperbolic(lam=0.35, chi=-0.2),
        KanjiMixture(theta=0.4, rho=0.0, omega=0.01, q=0.02),
        GaussLaplaceSum(theta=0.3, rho=0.001, omega=0.02, q=0.01),
        GaussLaplaceSum(theta=0.97, rho=0.0, omega=1.0, q=1.0),
    ])
    def test_unit_mass(self, dist):
        _quad_unit_mass(dist, tol=1e-6)

    def test_ged_matches_scipy_gennorm(self):
        # independent parametrization: gennorm beta=lam, scale=s*2**(1/lam)
        lam, s = 1.4, 0.02
        dist = GED(lam=lam, scale=s)
        r = np.linspace(-0.2, 0.2, 41)
        ref = stats.gennorm.pdf(r, beta=lam, scale=s * 2 ** (1 / lam))
        np.testing.assert_allclose(dist.pdf(r), ref, rtol=1e-12)

    def test_ged_normal_limit(self):
        r = np.linspace(-10.0, 10.0, 2001)
        ged = GED(lam=2.0).pdf(r)
        normal = np.exp(-r * r / 2.0) / math.sqrt(2.0 * math.pi)
        np.testing.assert_allclose(ged, normal, atol=1e-12)

    def test_ged_laplace_limit(self):
        r = np.linspace(-10.0, 10.0, 2001)
        ged = GED(lam=1.0).pdf(r)
        np.testing.assert_allclose(ged, 0.25 * np.exp(-np.abs(r) / 2.0),
                                   atol=1e-12)

    def test_ged_unit_scale_variances(self):
        # lam=2 is standard normal (variance 1); lam=1 has variance 8
        assert GED(lam=2.0).std() == pytest.approx(1.0, rel=1e-12)
        assert GED(lam=1.0).std() == pytest.approx(math.sqrt(8.0), rel=1e-12)

    def test_hyperbolic_symmetric_at_zero_skew(self):
        dist = Hyperbolic(lam=0.5, chi=0.0)
        r = np.linspace(0.0, 8.0, 100)
        np.testing.assert_allclose(dist.pdf(r), dist.pdf(-r), rtol=1e-14)

    @pytest.mark.parametrize("lam,chi", [
        (0.0, 0.0), (0.5, 0.5), (0.5, 0.7), (1.0, 0.0), (1.2, 0.1),
        (-0.5, 0.0),
    ])
    def test_hyperbolic_domain_guard(self, lam, chi):
        with pytest.raises(InvalidParameters):
            Hyperbolic(lam=lam, chi=chi)

    def test_kanji_endpoints(self):
        r = np.linspace(-0.1, 0.1, 31)
        normal = Normal(rho=0.001, omega=0.02)
        laplace = Laplace(q=0.015)
        pure_n = KanjiMixture(theta=1.0, rho=0.001, omega=0.02, q=0.015)
        pure_l = KanjiMixture(theta=0.0, rho=0.001, omega=0.02, q=0.015)
        np.testing.assert_allclose(pure_n.pdf(r), normal.pdf(r), rtol=1e-14)
        np.testing.assert_allclose(pure_l.pdf(r), laplace.pdf(r), rtol=1e-14)

    def test_gauss_laplace_sum_endpoints(self):
        r = np.linspace(-0.1, 0.1, 31)
        pure_n = GaussLaplaceSum(theta=1.0, rho=0.001, omega=0.02, q=9.0)
        np.testing.assert_allclose(pure_n.pdf(r),
                                   Normal(rho=0.001, omega=0.02).pdf(r),
                                   rtol=1e-13)
        pure_l = GaussLaplaceSum(theta=0.0, rho=5.0, omega=9.0, q=0.015)
        np.testing.assert_allclose(pure_l.pdf(r), Laplace(q=0.015).pdf(r),
                                   rtol=1e-13)

    def test_gauss_laplace_sum_matches_quadrature_convolution(self):
        # independent route: adaptive quadrature of the defining convolution
        dist = GaussLaplaceSum(theta=0.3, rho=0.001, omega=0.02, q=0.01)
        m, s, b = 0.3 * 0.001, 0.3 * 0.02, 0.7 * 0.01

        def conv(z):
            def integrand(u):
                gauss = math.exp(-((z - m - u) / s) ** 2 / 2.0) / (
                    math.sqrt(2.0 * math.pi) * s)
                return gauss * math.exp(-abs(u) / b) / (2.0 * b)

            val, _ = integrate.quad(integrand, -60 * b - 12 * s,
                                    60 * b + 12 * s, points=[0.0], limit=400)
            return val

        for z in np.linspace(-0.05, 0.05, 11):
            assert dist.pdf(z) == pytest.approx(conv(float(z)), rel=1e-9)

    def test_gauss_laplace_sum_log_density_stable_in_far_tails(self):
        dist = GaussLaplaceSum(theta=0.5, rho=0.0, omega=0.01, q=0.01)
        values = dist.log_pdf(np.array([-2.0, -0.5, 0.5, 2.0]))
        assert np.all(np.isfinite(values))
        # far tail decays like the Laplace component
        b = 0.5 * 0.01
        slope = (dist.log_pdf(2.0) - dist.log_pdf(1.0)) / 1.0
        assert slope == pytest.approx(-1.0 / b, rel=1e-3)

    def test_factory_round_trip(self):
        dist = make_distribution("ged", lam=1.2, scale=0.015)
        assert dist == GED(lam=1.2, scale=0.015)
        d = dist.to_dict()
        assert make_distribution(d["family"], **d["params"]) == dist
        with pytest.raises(InvalidParameters):
            make_distribution("cauchy")

    def test_all_families_registered(self):
        assert set(FAMILIES) == {"normal", "laplace", "ged", "hyperbolic",
                                 "kanji_mixture", "gauss_laplace_sum"}


class TestSampling:
    def test_seeded_determinism(self):
        for dist in (Normal(0.0, 1.0), Laplace(0.5), GED(1.3, 0.7),
                     Hyperbolic(0.5, 0.1),
                     KanjiMixture(0.4, 0.0, 1.0, 0.5),
                     GaussLaplaceSum(0.6, 0.0, 1.0, 0.5)):
            a = dist.sample(100, np.random.default_rng(3))
            b = dist.sample(100, np.random.default_rng(3))
            np.testing.assert_array_equal(a, b)

    def test_laplace_sample_standard_deviation(self, rng):
        q = 0.015
        samples = Laplace(q).sample(1_000_000, rng)
        assert samples.std() == pytest.approx(math.sqrt(2.0) * q, rel=0.01)

    def test_gauss_laplace_sum_theta_one_equals_normal_stream(self):
        normal = Normal(rho=0.002, omega=0.03)
        summed = GaussLaplaceSum(theta=1.0, rho=0.002, omega=0.03, q=1.0)
        a = normal.sample(1000, np.random.default_rng(9))
        b = summed.sample(1000, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_ged_gaussian_case_moments(self, rng):
        samples = GED(lam=2.0, scale=1.0).sample(1_000_000, rng)
        assert samples.std() == pytest.approx(1.0, rel=0.01)
        assert abs(stats.kurtosis(samples)) < 0.05

    def test_ged_samples_match_density(self, rng):
        dist = GED(lam=1.3, scale=0.9)
        samples = dist.sample(200_000, rng)
        hist, edges = np.histogram(samples, bins=40, range=(-4, 4),
                                   density=True)
        centers = (edges[:-1] + edges[1:]) / 2
        mask = hist > 0.01
        np.testing.assert_allclose(hist[mask], dist.pdf(centers)[mask],
                                   rtol=0.1)

    def test_kanji_mixture_moments(self, rng):
        dist = KanjiMixture(theta=0.7, rho=0.0, omega=0.01, q=0.03)
        samples = dist.sample(500_000, rng)
        assert samples.std() == pytest.approx(dist.std(), rel=0.01)

    def test_hyperbolic_sample_moments(self, rng):
        dist = Hyperbolic(lam=0.5, chi=0.1)
        samples = dist.sample(500_000, rng)
        mean_ref, _ = integrate.quad(lambda r: r * dist.pdf(r), -40, 40,
                                     limit=300)
        assert samples.mean() == pytest.approx(mean_ref, abs=0.01)
        assert samples.std() == pytest.approx(dist.std(), rel=0.02)


class TestFitting:
    def test_too_few_observations(self):
        with pytest.raises(TooFewObservations):
            fit_mle(np.zeros(10), "normal")

    def test_constant_returns_rejected(self):
        with pytest.raises(TooFewDistinctReturns):
            fit_mle(np.zeros(100), "laplace")

    def test_unknown_family(self):
        with pytest.raises(InvalidParameters):
            fit_mle(np.random.default_rng(0).normal(size=100), "weibull")

    def test_normal_closed_form(self, rng):
        data = rng.normal(0.001, 0.02, size=5000)
        fit = fit_mle(data, "normal")
        assert fit.spec.omega == pytest.approx(0.02, rel=0.05)
        assert fit.spec.rho == 0.0  # input is centered before fitting
        assert fit.converged and fit.iterations == 0

    def test_laplace_closed_form(self, rng):
        data = rng.laplace(0.0, 0.015, size=20000)
        fit = fit_mle(data, "laplace")
        assert fit.spec.q == pytest.approx(0.015, rel=0.03)

    def test_information_criteria_identity(self, rng):
        data = rng.normal(0.0, 0.02, size=500)
        fit = fit_mle(data, "normal")
        assert fit.aic == pytest.approx(2 * 2 - 2 * fit.log_likelihood)
        assert fit.bic == pytest.approx(2 * math.log(500)
                                        - 2 * fit.log_likelihood)
        assert fit.n_observations == 500

    def test_skewness_reported(self, rng):
        data = rng.normal(0.0, 1.0, size=2000)
        fit = fit_mle(data, "normal")
        assert fit.skewness == pytest.approx(float(stats.skew(data)))

    def test_ged_recovers_laplace_shape(self):
        rng = np.random.default_rng(42)
        data = rng.laplace(0.0, 0.015, size=100_000)
        fit = fit_mle(data, "ged")
        assert 0.9 <= fit.spec.lam <= 1.1
        assert fit.spec.scale == pytest.approx(0.015 / 2.0, rel=0.05)
        assert fit.converged

    def test_ged_recovers_normal_shape(self):
        rng = np.random.default_rng(42)
        data = rng.normal(0.0, 0.01, size=100_000)
        fit = fit_mle(data, "ged")
        assert 1.85 <= fit.spec.lam <= 2.15

    def test_ged_estimates_sharpen_with_sample_size(self):
        errors = []
        for n in (1000, 10_000, 100_000):
            rng = np.random.default_rng(5)
            data = GED(lam=1.5, scale=0.01).sample(n, rng)
            fit = fit_mle(data, "ged")
            errors.append(abs(fit.spec.lam - 1.5))
        assert errors[-1] < errors[0]
        assert errors[-1] < 0.05

    def test_ged_dominates_normal_on_laplace_data(self):
        rng = np.random.default_rng(11)
        data = rng.laplace(0.0, 0.015, size=10_000)
        ged = fit_mle(data, "ged")
        normal = fit_mle(data, "normal")
        assert ged.log_likelihood > normal.log_likelihood

    def test_hyperbolic_fit_beats_truth_likelihood(self):
        rng = np.random.default_rng(8)
        truth = Hyperbolic(lam=0.5, chi=0.1)
        data = truth.sample(20_000, rng)
        fit = fit_mle(data, "hyperbolic")
        centered = data - data.mean()
        truth_ll = float(np.sum(truth.log_pdf(centered)))
        assert fit.log_likelihood >= truth_ll - 1e-6
        assert 0.0 < fit.spec.lam < 1.0
        assert fit.spec.chi**2 < fit.spec.lam**2

    def test_kanji_fit_beats_truth_likelihood(self):
        rng = np.random.default_rng(8)
        truth = KanjiMixture(theta=0.7, rho=0.0, omega=0.01, q=0.02)
        data = truth.sample(20_000, rng)
        fit = fit_mle(data, "kanji_mixture")
        truth_ll = float(np.sum(truth.log_pdf(data - data.mean())))
        assert fit.log_likelihood >= truth_ll - 1e-6

    def test_gauss_laplace_sum_fit_holds_theta(self):
        rng = np.random.default_rng(8)
        truth = GaussLaplaceSum(theta=0.5, rho=0.0, omega=0.02, q=0.01)
        data = truth.sample(50_000, rng)
        fit = fit_mle(data, "gauss_laplace_sum",
                      init=GaussLaplaceSum(theta=0.5, rho=0.0, omega=1.0, q=1.0))
        assert fit.spec.theta == 0.5
        # identifiable combinations recovered
        assert fit.spec.theta * fit.spec.omega == pytest.approx(0.01, rel=0.1)
        assert (1 - fit.spec.theta) * fit.spec.q == pytest.approx(0.005,
                                                                  rel=0.1)

    def test_fit_accepts_return_series(self, rng):
        series = ReturnSeries(timestamps=np.arange(200.0),
                              values=rng.normal(0, 0.01, 200))
        fit = fit_mle(series, "normal")
        assert fit.n_observations == 200


class TestLaplaceSelfConvolution:
    def test_matches_closed_form(self):
        q = 1.0
        r = np.linspace(-12.0, 12.0, 481)
        conv = laplace_self_convolution(q, r)
        closed = (1.0 + np.abs(r) / q) * np.exp(-np.abs(r) / q) / (4.0 * q)
        assert np.max(np.abs(conv - closed)) < 1e-6

    def test_origin_value(self):
        q = 0.5
        conv = laplace_self_convolution(q, np.array([0.0]))
        assert conv[0] == pytest.approx(1.0 / (4.0 * q), rel=1e-6)

    def test_total_mass(self):
        # closed form integrates to one; the numerical result tracks it
        q = 1.0
        val, _ = integrate.quad(
            lambda r: (1.0 + abs(r) / q) * math.exp(-abs(r) / q) / (4.0 * q),
            -np.inf, np.inf, points=None)
        assert val == pytest.approx(1.0, abs=1e-10)
        r = np.linspace(-25.0, 25.0, 2001)
        conv = laplace_self_convolution(q, r)
        assert np.trapezoid(conv, r) == pytest.approx(1.0, abs=5e-4)

    def test_gap_to_single_laplace(self):
        q = 0.7
        r = np.linspace(-10.0, 10.0, 401)
        gap = laplace_convolution_gap(q, r)
        assert gap == pytest.approx(1.0 / (4.0 * q), rel=1e-12)


class TestUnconditionalPriceDensity:
    def test_narrow_mean_price_limit_recovers_laplace(self):
        q, mu0 = 0.02, 100.0
        sigma = math.sqrt(2.0) * q * mu0
        p = np.linspace(mu0 - 20 * sigma, mu0 + 20 * sigma, 161)
        density = unconditional_price_density(q, rho=0.0, omega=1e-6,
                                              mu0=mu0, p_grid=p)
        target = np.exp(-np.abs(p - mu0) / (q * mu0)) / (2.0 * q * mu0)
        assert np.max(np.abs(density - target)) < 1e-4

    def test_narrow_purchase_limit_recovers_lognormal(self):
        rho, omega, mu0 = 0.0, 0.3, 100.0
        mean = mu0 * math.exp(rho + omega**2 / 2)
        sd = mean * math.sqrt(math.exp(omega**2) - 1.0)
        p = np.linspace(max(mean - 20 * sd, 0.5), mean + 20 * sd, 161)
        density = unconditional_price_density(1e-3, rho, omega, mu0, p)
        target = np.exp(-(np.log(p / mu0) - rho) ** 2 / (2 * omega**2)) / (
            math.sqrt(2 * math.pi) * omega * p)
        assert np.max(np.abs(density - target)) < 1e-4

    def test_intermediate_regime_against_two_stage_sampling(self):
        q, rho, omega, mu0 = 0.02, 0.0, 0.3, 100.0
        rng = np.random.default_rng(123)
        n = 1_000_000
        mu = np.exp(np.log(mu0) + rho + omega * rng.standard_normal(n))
        u = rng.random(n)
        lap = np.sign(u - 0.5) * -np.log1p(-2 * np.abs(u - 0.5))
        p_samples = mu + q * mu * lap

        edges = np.linspace(40.0, 220.0, 21)
        counts, _ = np.histogram(p_samples, bins=edges)
        total_in_range = counts.sum()
        for k in range(20):
            grid = np.linspace(edges[k], edges[k + 1], 25)
            dens = unconditional_price_density(q, rho, omega, mu0, grid)
            prob = np.trapezoid(dens, grid)
            observed = counts[k] / n
            se = math.sqrt(prob * (1 - prob) / n)
            assert abs(observed - prob) <= 3.0 * se + 1e-6

    def test_integrates_to_one(self):
        p = np.linspace(0.25, 500.0, 1501)
        density = unconditional_price_density(0.02, 0.0, 0.3, 100.0, p)
        assert np.trapezoid(density, p) == pytest.approx(1.0, abs=1e-5)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            unconditional_price_density(0.0, 0.0, 0.3, 100.0, [100.0])


class TestCsv:
    def test_round_trip(self, rng):
        series = ReturnSeries(timestamps=np.arange(50.0),
                              values=rng.normal(0, 0.01, 50))
        buf = io.StringIO()
        write_returns_csv(series, buf)
        buf.seek(0)
        back = read_returns_csv(buf)
        np.testing.assert_array_equal(back.timestamps, series.timestamps)
        np.testing.assert_array_equal(back.values, series.values)

    def test_header_enforced(self):
        with pytest.raises(ValueError):
            read_returns_csv(io.StringIO("time,value\n1,0.5\n"))

    def test_binned_density_normalized(self, rng):
        centers, density = binned_density(rng.normal(size=10000), n_bins=50)
        width = centers[1] - centers[0]
        assert density.sum() * width == pytest.approx(1.0, rel=1e-6)
