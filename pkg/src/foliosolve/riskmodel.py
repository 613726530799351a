"""Factor risk estimation from a return panel.

Per-stock loadings by least squares on the factor returns (no
intercept), factor covariance as the centered sample covariance over the
same window, and specific variances from the mean-centered regression
residuals. Per-stock regressions are independent, so results do not
depend on evaluation order.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFactorError, DimensionMismatchError, ValidationError
from .model import FactorRiskModel, _readonly, _set

__all__ = [
    "ReturnPanel",
    "estimate_loadings",
    "estimate_factor_cov",
    "estimate_specific_variance",
    "assemble_risk_model",
]

LOADING_RIDGE = 1e-10
VARIANCE_FLOOR = 1e-12
DEFAULT_MIN_HISTORY = 42  # two months at 21 business days per month


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned daily stock and factor returns over one estimation window.

    ``valid_from[i]`` is the index of stock i's first valid observation;
    rows before it are ignored for that stock and may hold anything.
    """

    stock_returns: np.ndarray   # (window, n)
    factor_returns: np.ndarray  # (window, p)
    valid_from: np.ndarray      # (n,) ints

    def __post_init__(self):
        r = np.array(self.stock_returns, dtype=np.float64, order="C", copy=True)
        f = _readonly(self.factor_returns, ndim=2, name="factor_returns")
        vf = np.array(self.valid_from, dtype=np.int64, copy=True)
        if r.ndim != 2:
            raise ValidationError(f"stock_returns must be 2-dimensional, got {r.shape}")
        window = r.shape[0]
        if window < 2:
            raise ValidationError(f"window must have at least 2 rows, got {window}")
        if f.shape[0] != window:
            raise DimensionMismatchError("window row", window, f.shape[0])
        if vf.shape != (r.shape[1],):
            raise DimensionMismatchError("asset", r.shape[1], vf.shape)
        if np.any(vf < 0) or np.any(vf > window):
            raise ValidationError("valid_from entries must lie in [0, window]")
        for i in range(r.shape[1]):
            col = r[vf[i]:, i]
            if not np.all(np.isfinite(col)):
                raise ValidationError(f"stock {i} has non-finite returns inside its valid range")
        r.setflags(write=False)
        vf.setflags(write=False)
        _set(self, stock_returns=r, factor_returns=f, valid_from=vf)

    @property
    def window(self):
        return self.stock_returns.shape[0]

    @property
    def n_assets(self):
        return self.stock_returns.shape[1]

    @property
    def n_factors(self):
        return self.factor_returns.shape[1]


def _check_factor_rank(f):
    gram = f.T @ f
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    hi = float(eigs[-1])
    lo = float(eigs[0])
    if lo <= 1e-12 * max(hi, 1e-300):
        vecs = np.linalg.eigh(0.5 * (gram + gram.T))[1]
        idx = int(np.argmax(np.abs(vecs[:, 0])))
        raise DegenerateFactorError(
            idx, f"factor {idx} is degenerate: factor gram matrix has "
                 f"eigenvalue {lo:.3e} (largest {hi:.3e})")


def estimate_loadings(panel: ReturnPanel, min_history: int = DEFAULT_MIN_HISTORY):
    """Least-squares loadings per stock; returns (beta, eligible).

    Stocks with fewer valid observations than ``min_history`` get zero
    loadings and eligible=False. The normal equations carry a 1e-10 ridge
    on the diagonal for numerical safety.
    """
    p = panel.n_factors
    if min_history < p + 1:
        raise ValidationError(
            f"min_history must be at least n_factors + 1 = {p + 1}, got {min_history}")
    f_all = panel.factor_returns
    _check_factor_rank(f_all)
    n = panel.n_assets
    window = panel.window
    beta = np.zeros((n, p))
    eligible = np.zeros(n, dtype=bool)
    ridge = LOADING_RIDGE * np.eye(p)
    # stocks sharing a start row share a factorization
    for start in np.unique(panel.valid_from):
        cols = np.flatnonzero(panel.valid_from == start)
        if window - start < min_history:
            continue
        f = f_all[start:]
        gram = f.T @ f + ridge
        rhs = f.T @ panel.stock_returns[start:, cols]
        beta[cols] = np.linalg.solve(gram, rhs).T
        eligible[cols] = True
    return beta, eligible


def estimate_factor_cov(factor_returns) -> np.ndarray:
    """Centered sample covariance of the factor returns, divisor window-1."""
    f = np.asarray(factor_returns, dtype=np.float64)
    if f.ndim != 2:
        raise ValidationError(f"factor_returns must be 2-dimensional, got {f.shape}")
    window = f.shape[0]
    if window < 2:
        raise ValidationError(f"need at least 2 rows to estimate covariance, got {window}")
    centered = f - f.mean(axis=0)
    return (centered.T @ centered) / (window - 1)


def estimate_specific_variance(panel: ReturnPanel, beta) -> np.ndarray:
    """Sample variance of the mean-centered regression residuals per stock.

    Floored at 1e-12; stocks with fewer than two valid rows sit at the
    floor and trigger a warning.
    """
    beta = np.asarray(beta, dtype=np.float64)
    n = panel.n_assets
    if beta.shape != (n, panel.n_factors):
        raise DimensionMismatchError("asset", n, beta.shape)
    window = panel.window
    out = np.full(n, VARIANCE_FLOOR)
    short = []
    for start in np.unique(panel.valid_from):
        cols = np.flatnonzero(panel.valid_from == start)
        count = window - start
        if count < 2:
            short.extend(cols.tolist())
            continue
        resid = (panel.stock_returns[start:, cols]
                 - panel.factor_returns[start:] @ beta[cols].T)
        var = resid.var(axis=0, ddof=1)
        out[cols] = np.maximum(var, VARIANCE_FLOOR)
    if short:
        warnings.warn(
            f"stocks {sorted(short)} have fewer than 2 valid rows; "
            "specific variance floored", stacklevel=2)
    return out


def assemble_risk_model(beta, factor_cov, specific_var) -> FactorRiskModel:
    """Symmetrize the factor covariance and build a validated risk model."""
    fc = np.asarray(factor_cov, dtype=np.float64)
    sym = 0.5 * (fc + fc.T)
    return FactorRiskModel(beta=beta, factor_cov=sym, specific_var=specific_var)
