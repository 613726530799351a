"""Synthetic market panels and benchmark-instance construction.

Everything here is deterministic given (seed, config, date_index): all
randomness flows through seed sequences derived from those values, and
generation is single threaded. Independent seeds may generate
concurrently.

The panel mimics the inputs a production build would pull from licensed
daily data: closes, share volumes, bid/ask, implied vols with a missing
cohort, and factor returns. Instances are then assembled from the panel:
a forward-looking alpha with volatility-scaled noise, an estimated
factor risk model, spread and power-law impact costs, and
market-neutrality plus style exposure bounds.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import (
    ExposureConstraints,
    FactorRiskModel,
    MultiPeriodProblem,
    SinglePeriodProblem,
    _readonly,
    _set,
    check_feasibility,
)
from .riskmodel import (
    ReturnPanel,
    assemble_risk_model,
    estimate_factor_cov,
    estimate_loadings,
    estimate_specific_variance,
)

__all__ = [
    "MarketPanel",
    "GeneratorConfig",
    "gen_market_data",
    "build_alpha",
    "build_costs",
    "build_exposures",
    "build_single_instance",
    "extend_multi",
    "estimate_risk_from_panel",
    "intraday_scale",
]

ADV_WINDOW = 60
FORWARD_DAYS = 5
VOL_LOOKBACK = 504
VOL_MIN_HISTORY = 42
RISK_WINDOW = 504

# seed-sequence tags keeping the independent random streams apart
_TAG_PANEL = 101
_TAG_ALPHA = 102
_TAG_BOOK = 103


@dataclass(frozen=True)
class MarketPanel:
    """Daily synthetic market data for one universe."""

    dates: np.ndarray         # (days,) ordered day indices
    prices: np.ndarray        # (days, n) closes
    volumes: np.ndarray       # (days, n) shares per day
    bid: np.ndarray           # (days, n)
    ask: np.ndarray           # (days, n)
    implied_vol: np.ndarray   # (days, n), NaN where missing
    factor_returns: np.ndarray  # (days, p); row k is the return into day k

    def __post_init__(self):
        dates = np.array(self.dates, dtype=np.int64, copy=True)
        prices = _readonly(self.prices, ndim=2, name="prices")
        volumes = _readonly(self.volumes, ndim=2, name="volumes")
        bid = _readonly(self.bid, ndim=2, name="bid")
        ask = _readonly(self.ask, ndim=2, name="ask")
        iv = np.array(self.implied_vol, dtype=np.float64, order="C", copy=True)
        fr = _readonly(self.factor_returns, ndim=2, name="factor_returns")
        days = prices.shape[0]
        if dates.shape != (days,) or np.any(np.diff(dates) <= 0):
            raise ValidationError("dates must be strictly increasing with one entry per day")
        for name, arr in (("volumes", volumes), ("bid", bid), ("ask", ask)):
            if arr.shape != prices.shape:
                raise ValidationError(f"{name} shape {arr.shape} != prices shape {prices.shape}")
        if iv.shape != prices.shape:
            raise ValidationError("implied_vol shape mismatch")
        if fr.shape[0] != days:
            raise ValidationError("factor_returns must have one row per day")
        if np.any(prices <= 0.0):
            raise ValidationError("prices must be positive")
        if np.any(volumes <= 0.0):
            raise ValidationError("volumes must be positive")
        if np.any(bid <= 0.0) or np.any(ask < bid):
            raise ValidationError("need ask >= bid > 0")
        dates.setflags(write=False)
        iv.setflags(write=False)
        _set(self, dates=dates, prices=prices, volumes=volumes, bid=bid,
             ask=ask, implied_vol=iv, factor_returns=fr)

    @property
    def days(self):
        return self.prices.shape[0]

    @property
    def n_assets(self):
        return self.prices.shape[1]

    @property
    def n_factors(self):
        return self.factor_returns.shape[1]


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    n: int = 200
    days: int = 600
    p: int = 6
    missing_iv_fraction: float = 0.2
    gmv: float = 1e8
    exponent_d: float = 1.5
    exposure_rows: int = None  # defaults to p + 1

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValidationError("need at least one asset and one factor")
        if self.days <= ADV_WINDOW + FORWARD_DAYS + 5:
            raise ValidationError(
                f"days must exceed {ADV_WINDOW + FORWARD_DAYS + 5} "
                "(trailing volume window plus forward alpha days), got "
                f"{self.days}")
        if not 0.0 <= self.missing_iv_fraction <= 1.0:
            raise ValidationError("missing_iv_fraction must lie in [0, 1]")
        if self.gmv <= 0.0:
            raise ValidationError("gmv must be positive")
        if not (1.0 < self.exponent_d <= 2.0):
            raise ValidationError("exponent_d must lie in (1, 2]")
        rows = self.p + 1 if self.exposure_rows is None else int(self.exposure_rows)
        if not 0 <= rows <= self.p + 1:
            raise ValidationError(
                f"exposure_rows must lie in [0, p + 1] = [0, {self.p + 1}], got {rows}")
        _set(self, exposure_rows=rows)

    def default_date_index(self):
        return self.days - FORWARD_DAYS - 1


def _mix_seed(*entropy):
    return np.random.SeedSequence([int(e) for e in entropy])


def gen_market_data(config: GeneratorConfig) -> MarketPanel:
    """Simulate one daily market panel; bitwise deterministic per seed."""
    rng = np.random.default_rng(_mix_seed(_TAG_PANEL, config.seed))
    n, days, p = config.n, config.days, config.p

    factor_vol = rng.uniform(0.003, 0.010, size=p)
    beta_true = np.empty((n, p))
    beta_true[:, 0] = rng.normal(1.0, 0.3, size=n)
    if p > 1:
        beta_true[:, 1:] = rng.normal(0.0, 0.5, size=(n, p - 1))
    idio_vol = rng.uniform(0.01, 0.04, size=n)

    f = rng.standard_normal((days - 1, p)) * factor_vol
    eps = rng.standard_normal((days - 1, n)) * idio_vol
    rets = f @ beta_true.T + eps
    rets = np.maximum(rets, -0.5)  # price positivity guard; astronomically rare

    prices = np.empty((days, n))
    prices[0] = 100.0
    prices[1:] = 100.0 * np.cumprod(1.0 + rets, axis=0)

    adv_level = 10.0 ** rng.uniform(5.0, 7.0, size=n)
    volumes = adv_level * np.exp(rng.normal(0.0, 0.3, size=(days, n)))

    half_spread = rng.uniform(2e-4, 30e-4, size=n)
    bid = prices * (1.0 - half_spread)
    ask = prices * (1.0 + half_spread)

    total_vol = np.sqrt((beta_true ** 2 * factor_vol ** 2).sum(axis=1) + idio_vol ** 2)
    implied = total_vol * np.exp(rng.normal(0.0, 0.1, size=(days, n)))
    n_missing = int(round(config.missing_iv_fraction * n))
    if n_missing > 0:
        missing_idx = rng.choice(n, size=n_missing, replace=False)
        implied[:, missing_idx] = np.nan

    factor_panel = np.zeros((days, p))
    factor_panel[1:] = f
    return MarketPanel(dates=np.arange(days), prices=prices, volumes=volumes,
                       bid=bid, ask=ask, implied_vol=implied,
                       factor_returns=factor_panel)


def _trailing_returns(panel: MarketPanel, date_index, max_window):
    stop = date_index
    start = max(1, stop - max_window + 1)
    if stop < start:
        raise ValidationError(f"no return history before date_index {date_index}")
    prices = panel.prices
    return prices[start:stop + 1] / prices[start - 1:stop] - 1.0, start


def daily_volatility(panel: MarketPanel, date_index) -> np.ndarray:
    """Implied daily vol at the date, backfilled from trailing return std.

    Missing implied vols fall back to the standard deviation of up to the
    last two years (504 rows, at least 42) of daily returns.
    """
    sig = np.array(panel.implied_vol[date_index], copy=True)
    missing = ~np.isfinite(sig)
    if missing.any():
        rets, _ = _trailing_returns(panel, date_index, VOL_LOOKBACK)
        if rets.shape[0] < VOL_MIN_HISTORY:
            raise ValidationError(
                f"only {rets.shape[0]} trailing days at date_index {date_index}; "
                f"volatility fallback needs at least {VOL_MIN_HISTORY}")
        sig[missing] = rets[:, missing].std(axis=0, ddof=1)
    return sig


def build_alpha(panel: MarketPanel, date_index, seed) -> np.ndarray:
    """Five-day forward mean return plus volatility-scaled noise."""
    if date_index + FORWARD_DAYS >= panel.days:
        raise ValidationError(
            f"date_index {date_index} leaves fewer than {FORWARD_DAYS} forward days "
            f"in a {panel.days}-day panel")
    prices = panel.prices
    seg = prices[date_index:date_index + FORWARD_DAYS + 1]
    fwd = seg[1:] / seg[:-1] - 1.0
    base = fwd.mean(axis=0)
    sig = daily_volatility(panel, date_index)
    rng = np.random.default_rng(_mix_seed(_TAG_ALPHA, seed))
    return base + 0.5 * sig * rng.standard_normal(panel.n_assets)


def build_costs(panel: MarketPanel, date_index, gmv, exponent):
    """Spread and impact coefficient vectors at the date.

    Spread is the half bid-offer width relative to mid. Impact is
    daily vol times (gmv / currency ADV) ** (exponent - 1), with ADV the
    mean of volume times close over the prior 60 days.
    """
    if date_index < ADV_WINDOW:
        raise ValidationError(
            f"date_index {date_index} leaves fewer than {ADV_WINDOW} trailing days")
    bid = panel.bid[date_index]
    ask = panel.ask[date_index]
    mid = 0.5 * (bid + ask)
    spread = (ask - bid) / (2.0 * mid)
    adv = (panel.volumes[date_index - ADV_WINDOW:date_index]
           * panel.prices[date_index - ADV_WINDOW:date_index]).mean(axis=0)
    if np.any(adv <= 0.0):
        raise ValidationError("average daily volume must be positive")
    sig = daily_volatility(panel, date_index)
    impact = sig * (gmv / adv) ** (exponent - 1.0)
    return spread, impact


def estimate_risk_from_panel(panel: MarketPanel, date_index,
                             window=RISK_WINDOW,
                             min_history=VOL_MIN_HISTORY) -> FactorRiskModel:
    """Estimate the factor risk model from trailing panel returns."""
    rets, start = _trailing_returns(panel, date_index, window)
    factor = panel.factor_returns[start:date_index + 1]
    rp = ReturnPanel(stock_returns=rets, factor_returns=factor,
                     valid_from=np.zeros(panel.n_assets, dtype=np.int64))
    beta, _ = estimate_loadings(rp, min_history)
    fcov = estimate_factor_cov(rp.factor_returns)
    svar = estimate_specific_variance(rp, beta)
    return assemble_risk_model(beta, fcov, svar)


def build_exposures(panel: MarketPanel, risk_model: FactorRiskModel,
                    config: GeneratorConfig) -> ExposureConstraints:
    """Market-neutral row (+-0.05) plus style rows from the loadings (+-0.10)."""
    n = risk_model.n_assets
    p = risk_model.n_factors
    rows = config.exposure_rows
    a = np.vstack([np.ones((1, n)), risk_model.beta.T])[:rows]
    lower = np.concatenate(([-0.05], np.full(p, -0.10)))[:rows]
    return ExposureConstraints(a=a, lower=lower, upper=-lower)


def _initial_book(n, seed):
    rng = np.random.default_rng(_mix_seed(_TAG_BOOK, seed))
    k = max(1, int(round(0.1 * n)))
    idx = rng.choice(n, size=k, replace=False)
    vals = rng.standard_normal(k)
    while np.abs(vals).sum() == 0.0:
        vals = rng.standard_normal(k)
    w0 = np.zeros(n)
    w0[idx] = vals
    return 0.5 * w0 / np.abs(w0).sum()


def build_single_instance(panel: MarketPanel, date_index, lambdas,
                          config: GeneratorConfig) -> SinglePeriodProblem:
    """Compose risk, alpha, costs, exposures, and a sparse half-deployed book."""
    lam1, lam2, lam3 = (float(x) for x in lambdas)
    risk = estimate_risk_from_panel(panel, date_index)
    alpha = build_alpha(panel, date_index,
                        seed=_mix_seed(config.seed, date_index, _TAG_ALPHA).generate_state(1)[0])
    spread, impact = build_costs(panel, date_index, config.gmv, config.exponent_d)
    exposures = build_exposures(panel, risk, config)
    w0 = _initial_book(panel.n_assets,
                       seed=_mix_seed(config.seed, date_index, _TAG_BOOK).generate_state(1)[0])
    return SinglePeriodProblem(gmv=config.gmv, alpha=alpha, risk=risk,
                               spread=spread, impact=impact,
                               exponent=config.exponent_d, lambda1=lam1,
                               lambda2=lam2, lambda3=lam3,
                               exposures=exposures, w0=w0)


def intraday_scale(t, horizon):
    """U-shaped liquidity profile: 0.5 + 2*(t/horizon - 0.5)**2."""
    frac = np.asarray(t, dtype=np.float64) / horizon
    return 0.5 + 2.0 * (frac - 0.5) ** 2


def extend_multi(single: SinglePeriodProblem, horizon, w_terminal=None,
                 solver_config=None) -> MultiPeriodProblem:
    """Extend a one-step instance to a trajectory instance.

    Alpha and risk stay constant across periods; spread and impact are
    scaled by the U-shaped profile, normalized so the intermediate-period
    cost vectors sum back to the one-step vectors. When no terminal
    portfolio is supplied, the one-step optimum is solved for and
    polished onto the feasible set.
    """
    horizon = int(horizon)
    if horizon < 2:
        raise ValidationError(f"horizon must be >= 2, got {horizon}")
    if w_terminal is None:
        from .oracle import polish_to_feasible
        from .solver import solve_single

        outcome = solve_single(single, solver_config)
        if not np.all(np.isfinite(outcome.weights)):
            raise ValidationError("terminal-portfolio solve produced non-finite weights")
        w_terminal = polish_to_feasible(outcome.weights, single.exposures)
    w_terminal = np.asarray(w_terminal, dtype=np.float64)
    report = check_feasibility(single, w_terminal, 1e-9)
    if not report.feasible:
        raise ValidationError(
            "w_terminal is infeasible: exposure violation "
            f"{report.max_exposure_violation:.3e}, budget violation "
            f"{report.budget_violation:.3e}")
    eta = intraday_scale(np.arange(1, horizon + 1), horizon)
    scale = eta / eta[:horizon - 1].sum()
    return MultiPeriodProblem(
        gmv=single.gmv, horizon=horizon,
        alpha_t=np.tile(single.alpha, (horizon, 1)),
        risk=single.risk,
        spread_t=np.outer(scale, single.spread),
        impact_t=np.outer(scale, single.impact),
        exponent=single.exponent, lambda1=single.lambda1,
        lambda2=single.lambda2, lambda3=single.lambda3,
        exposures=single.exposures, w0=single.w0, w_terminal=w_terminal)
