import numpy as np
import pytest

from foliosolve.model import (
    ExposureConstraints,
    FactorRiskModel,
    MultiPeriodProblem,
    SinglePeriodProblem,
)


def random_risk_model(rng, n, p, scale=0.02):
    beta = rng.normal(0.0, 1.0, size=(n, p))
    half = rng.normal(0.0, scale, size=(p, p))
    fcov = half @ half.T
    svar = rng.uniform(1e-4, 2e-3, size=n)
    return FactorRiskModel(beta=beta, factor_cov=fcov, specific_var=svar)


def random_exposures(rng, n, m):
    if m == 0:
        return ExposureConstraints(a=np.zeros((0, n)), lower=np.zeros(0), upper=np.zeros(0))
    a = rng.normal(0.0, 1.0, size=(m, n))
    width = rng.uniform(0.05, 0.5, size=m)
    return ExposureConstraints(a=a, lower=-width, upper=width)


def random_single_problem(rng, n=4, p=2, m=2, lambdas=None, exponent=1.5, gmv=None):
    lam1, lam2, lam3 = lambdas if lambdas is not None else (
        rng.uniform(1e-8, 1e-4), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0))
    if gmv is None:
        gmv = float(rng.uniform(1e6, 1e9))
    w0 = rng.normal(0.0, 1.0, size=n)
    w0 *= rng.uniform(0.2, 0.9) / max(np.abs(w0).sum(), 1e-12)
    return SinglePeriodProblem(
        gmv=gmv,
        alpha=rng.normal(0.0, 0.01, size=n),
        risk=random_risk_model(rng, n, p),
        spread=rng.uniform(1e-4, 3e-3, size=n),
        impact=rng.uniform(1e-3, 0.1, size=n),
        exponent=exponent,
        lambda1=lam1, lambda2=lam2, lambda3=lam3,
        exposures=random_exposures(rng, n, m),
        w0=w0)


def random_multi_problem(rng, n=3, horizon=4, p=2, m=2, lambdas=None, exponent=1.5,
                         w_terminal=None, gmv=None):
    single = random_single_problem(rng, n=n, p=p, m=m, lambdas=lambdas,
                                   exponent=exponent, gmv=gmv)
    if w_terminal is None:
        w_terminal = np.zeros(n)
    scale = rng.uniform(0.5, 1.5, size=(horizon, 1))
    return MultiPeriodProblem(
        gmv=single.gmv, horizon=horizon,
        alpha_t=np.tile(single.alpha, (horizon, 1)),
        risk=single.risk,
        spread_t=scale * single.spread,
        impact_t=scale * single.impact,
        exponent=single.exponent,
        lambda1=single.lambda1, lambda2=single.lambda2, lambda3=single.lambda3,
        exposures=single.exposures, w0=single.w0, w_terminal=w_terminal)


@pytest.fixture
def rng():
    return np.random.default_rng(424242)
