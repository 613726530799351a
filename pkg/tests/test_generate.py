import numpy as np
import pytest

from foliosolve.errors import ValidationError
from foliosolve.generate import (
    GeneratorConfig,
    build_alpha,
    build_costs,
    build_exposures,
    build_single_instance,
    estimate_risk_from_panel,
    extend_multi,
    gen_market_data,
    intraday_scale,
    MarketPanel,
)
from foliosolve.model import MultiPeriodProblem, check_feasibility


SMALL = GeneratorConfig(seed=11, n=12, days=90, p=2)


@pytest.fixture(scope="module")
def small_panel():
    return gen_market_data(SMALL)


class TestGenMarketData:
    def test_same_seed_bitwise_identical(self, small_panel):
        again = gen_market_data(GeneratorConfig(seed=11, n=12, days=90, p=2))
        np.testing.assert_array_equal(again.prices, small_panel.prices)
        np.testing.assert_array_equal(again.volumes, small_panel.volumes)
        np.testing.assert_array_equal(again.implied_vol, small_panel.implied_vol)
        np.testing.assert_array_equal(again.factor_returns, small_panel.factor_returns)

    def test_different_seed_differs(self, small_panel):
        other = gen_market_data(GeneratorConfig(seed=12, n=12, days=90, p=2))
        assert not np.array_equal(other.prices, small_panel.prices)

    def test_no_missing_when_fraction_zero(self):
        panel = gen_market_data(GeneratorConfig(seed=1, n=10, days=80, p=2,
                                                missing_iv_fraction=0.0))
        assert np.all(np.isfinite(panel.implied_vol))

    def test_missing_fraction_applied(self, small_panel):
        missing_stocks = np.all(~np.isfinite(small_panel.implied_vol), axis=0)
        assert missing_stocks.sum() == round(0.2 * 12)

    def test_realized_vol_tracks_generative_vol(self):
        cfg = GeneratorConfig(seed=5, n=30, days=600, p=3, missing_iv_fraction=0.0)
        panel = gen_market_data(cfg)
        rets = panel.prices[1:] / panel.prices[:-1] - 1.0
        realized = rets.std(axis=0, ddof=1)
        generative = panel.implied_vol[0] / np.exp(
            np.log(panel.implied_vol / panel.implied_vol[0]).mean(axis=0))
        # implied vols are noisy copies of the generative total vol
        ratio = realized / np.median(panel.implied_vol, axis=0)
        assert np.all(ratio > 0.75) and np.all(ratio < 1.25)

    def test_days_floor_enforced(self):
        with pytest.raises(ValidationError, match="days"):
            GeneratorConfig(seed=0, n=5, days=70)

    def test_invariants(self, small_panel):
        assert np.all(small_panel.prices > 0)
        assert np.all(small_panel.volumes > 0)
        assert np.all(small_panel.ask >= small_panel.bid)
        assert np.all(small_panel.bid > 0)
        assert np.all(np.diff(small_panel.dates) > 0)


class TestBuildAlpha:
    def test_constant_prices_zero_base(self):
        days, n = 90, 4
        prices = np.full((days, n), 50.0)
        panel = MarketPanel(dates=np.arange(days), prices=prices,
                            volumes=np.full((days, n), 1e5),
                            bid=prices * 0.999, ask=prices * 1.001,
                            implied_vol=np.zeros((days, n)),
                            factor_returns=np.zeros((days, 1)))
        alpha = build_alpha(panel, 70, seed=3)
        np.testing.assert_allclose(alpha, np.zeros(n), atol=1e-15)

    def test_one_percent_path(self):
        days, n = 90, 2
        base = 100.0 * np.cumprod(np.full(days, 1.01))
        prices = np.tile(base.reshape(-1, 1), (1, n))
        panel = MarketPanel(dates=np.arange(days), prices=prices,
                            volumes=np.full((days, n), 1e5),
                            bid=prices * 0.999, ask=prices * 1.001,
                            implied_vol=np.zeros((days, n)),
                            factor_returns=np.zeros((days, 1)))
        alpha = build_alpha(panel, 70, seed=3)
        np.testing.assert_allclose(alpha, np.full(n, 0.01), rtol=1e-12)

    def test_noise_scale_tracks_volatility(self, small_panel):
        alphas = np.array([build_alpha(small_panel, 80, seed=s) for s in range(400)])
        spread = alphas.std(axis=0)
        from foliosolve.generate import daily_volatility
        sig = daily_volatility(small_panel, 80)
        np.testing.assert_allclose(spread, 0.5 * sig, rtol=0.2)

    def test_insufficient_forward_days(self, small_panel):
        with pytest.raises(ValidationError, match="forward"):
            build_alpha(small_panel, 86, seed=0)

    def test_deterministic_per_seed(self, small_panel):
        a1 = build_alpha(small_panel, 80, seed=9)
        a2 = build_alpha(small_panel, 80, seed=9)
        np.testing.assert_array_equal(a1, a2)


class TestBuildCosts:
    def test_relative_half_spread(self):
        days, n = 90, 1
        prices = np.full((days, n), 100.0)
        panel = MarketPanel(dates=np.arange(days), prices=prices,
                            volumes=np.full((days, n), 1e5),
                            bid=np.full((days, n), 99.0), ask=np.full((days, n), 101.0),
                            implied_vol=np.full((days, n), 0.02),
                            factor_returns=np.zeros((days, 1)))
        spread, _ = build_costs(panel, 70, gmv=1e6, exponent=1.5)
        assert spread[0] == pytest.approx(0.01, abs=1e-15)

    def test_impact_formula(self):
        days, n = 90, 1
        prices = np.full((days, n), 100.0)
        volumes = np.full((days, n), 1e4)  # currency adv = 1e6
        panel = MarketPanel(dates=np.arange(days), prices=prices, volumes=volumes,
                            bid=prices * 0.999, ask=prices * 1.001,
                            implied_vol=np.full((days, n), 0.02),
                            factor_returns=np.zeros((days, 1)))
        _, impact = build_costs(panel, 70, gmv=1e7, exponent=1.5)
        assert impact[0] == pytest.approx(0.02 * np.sqrt(10.0), rel=1e-12)

    def test_unit_exponent_ignores_adv(self):
        days, n = 90, 1
        prices = np.full((days, n), 100.0)
        panel = MarketPanel(dates=np.arange(days), prices=prices,
                            volumes=np.full((days, n), 12345.0),
                            bid=prices * 0.999, ask=prices * 1.001,
                            implied_vol=np.full((days, n), 0.02),
                            factor_returns=np.zeros((days, 1)))
        _, impact = build_costs(panel, 70, gmv=1e9, exponent=1.0)
        assert impact[0] == pytest.approx(0.02, abs=1e-15)

    def test_needs_trailing_window(self, small_panel):
        with pytest.raises(ValidationError, match="trailing"):
            build_costs(small_panel, 59, gmv=1e8, exponent=1.5)


class TestBuildExposures:
    def test_origin_is_feasible(self, small_panel):
        risk = estimate_risk_from_panel(small_panel, 80)
        expo = build_exposures(small_panel, risk, SMALL)
        assert expo.m == SMALL.p + 1
        assert np.all(expo.lower < 0) and np.all(expo.upper > 0)

    def test_unit_style_exposure_violates_bound(self):
        from foliosolve.model import FactorRiskModel
        beta = np.zeros((4, 2))
        beta[0, 0] = 1.0
        risk = FactorRiskModel(beta=beta, factor_cov=1e-4 * np.eye(2),
                               specific_var=np.full(4, 1e-4))
        cfg = GeneratorConfig(seed=0, n=4, days=80, p=2)
        expo = build_exposures(None, risk, cfg)
        w = np.array([1.0, 0.0, 0.0, 0.0])
        style = expo.a[1] @ w
        assert style == 1.0 > expo.upper[1]


class TestBuildSingleInstance:
    def test_invariants_and_determinism(self, small_panel):
        prob1 = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        prob2 = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        np.testing.assert_array_equal(prob1.alpha, prob2.alpha)
        np.testing.assert_array_equal(prob1.w0, prob2.w0)
        np.testing.assert_array_equal(prob1.risk.beta, prob2.risk.beta)
        assert np.abs(prob1.w0).sum() == pytest.approx(0.5, abs=1e-12)
        assert np.all(prob1.spread > 0)
        assert np.all(prob1.impact > 0)

    def test_seed_changes_instance(self, small_panel):
        other_cfg = GeneratorConfig(seed=12, n=12, days=90, p=2)
        prob1 = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        prob2 = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), other_cfg)
        assert not np.array_equal(prob1.w0, prob2.w0)


class TestIntradayProfile:
    @pytest.mark.parametrize("horizon", [2, 4, 10])
    def test_endpoint_and_midpoint_values(self, horizon):
        assert intraday_scale(0, horizon) == 1.0
        assert intraday_scale(horizon, horizon) == 1.0
        assert intraday_scale(horizon / 2.0, horizon) == 0.5

    def test_profile_matches_direct_formula(self):
        horizon = 10
        t = np.arange(1, horizon + 1)
        expected = 0.5 + 2.0 * (t / 10.0 - 0.5) ** 2
        np.testing.assert_allclose(intraday_scale(t, horizon), expected, atol=1e-15)


class TestExtendMulti:
    def test_cost_normalization_identity(self, small_panel):
        prob = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        for horizon in (2, 3, 10):
            multi = extend_multi(prob, horizon, w_terminal=np.zeros(prob.n))
            np.testing.assert_allclose(multi.spread_t[:horizon - 1].sum(axis=0),
                                       prob.spread, rtol=1e-12)
            np.testing.assert_allclose(multi.impact_t[:horizon - 1].sum(axis=0),
                                       prob.impact, rtol=1e-12)

    def test_cost_ratio_constant_across_periods(self, small_panel):
        prob = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        multi = extend_multi(prob, 5, w_terminal=np.zeros(prob.n))
        base = prob.spread / prob.impact
        for t in range(5):
            np.testing.assert_allclose(multi.spread_t[t] / multi.impact_t[t], base,
                                       rtol=1e-12)

    def test_alpha_constant_across_periods(self, small_panel):
        prob = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        multi = extend_multi(prob, 4, w_terminal=np.zeros(prob.n))
        for t in range(4):
            np.testing.assert_array_equal(multi.alpha_t[t], prob.alpha)

    def test_default_terminal_is_solved_and_feasible(self, small_panel):
        prob = build_single_instance(small_panel, 80, (1e-5, 50.0, 50.0), SMALL)
        multi = extend_multi(prob, 3)
        report = check_feasibility(prob, multi.w_terminal, 1e-9)
        assert report.feasible

    def test_infeasible_terminal_rejected(self, small_panel):
        prob = build_single_instance(small_panel, 80, (1e-6, 10.0, 10.0), SMALL)
        bad = np.full(prob.n, 1.0 / prob.n * 1.5)
        with pytest.raises(ValidationError):
            extend_multi(prob, 3, w_terminal=bad)
