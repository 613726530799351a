"""Problem data types, objective evaluation, and feasibility checks.

Containers are frozen dataclasses holding read-only float64 arrays, so
instances are safe to share across threads; every operation in this
module is a pure function. The risk matrix is kept in factor form
(loadings, factor covariance, specific variances) and is only ever
applied as a matrix-vector product, never assembled densely.

Objectives are evaluated internally in gross-value-normalized units
(value per unit of gross market value) and rescaled on output, which
keeps the quadratic risk term well conditioned for book sizes around
1e8.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "FactorRiskModel",
    "ExposureConstraints",
    "SinglePeriodProblem",
    "MultiPeriodProblem",
    "FeasibilityReport",
    "risk_matvec",
    "eval_single_objective",
    "eval_multi_objective",
    "check_feasibility",
]


def _readonly(x, dtype=np.float64, ndim=None, name="array"):
    arr = np.array(x, dtype=dtype, order="C", copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _set(obj, **fields):
    for k, v in fields.items():
        object.__setattr__(obj, k, v)


def _vector(v, expected, axis):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != expected:
        got = v.shape[0] if v.ndim == 1 else v.shape
        raise DimensionMismatchError(axis, expected, got)
    return v


def abs_power(x, d):
    """Elementwise x**d for x >= 0, with an exact branch at zero and d == 2.

    Computed as exp(d * log x) on the positive entries; the zero branch
    avoids log(0), and the d == 2 branch keeps squares exact.
    """
    x = np.asarray(x, dtype=np.float64)
    if d == 2.0:
        return x * x
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.exp(d * np.log(x[pos]))
    return out


@dataclass(frozen=True)
class FactorRiskModel:
    """Factor-structured covariance: loadings, factor covariance, specific variances.

    The implied asset covariance is ``beta @ factor_cov @ beta.T + diag(specific_var)``
    but is never materialized; use :func:`risk_matvec`.
    """

    beta: np.ndarray          # (n, p) factor loadings
    factor_cov: np.ndarray    # (p, p) daily factor return covariance
    specific_var: np.ndarray  # (n,) daily residual variances

    def __post_init__(self):
        beta = _readonly(self.beta, ndim=2, name="beta")
        fcov = _readonly(self.factor_cov, ndim=2, name="factor_cov")
        svar = _readonly(self.specific_var, ndim=1, name="specific_var")
        n, p = beta.shape
        if fcov.shape != (p, p):
            raise DimensionMismatchError("factor", p, fcov.shape)
        if svar.shape[0] != n:
            raise DimensionMismatchError("asset", n, svar.shape[0])
        if np.max(np.abs(fcov - fcov.T), initial=0.0) > 1e-12:
            raise ValidationError("factor_cov is not symmetric within 1e-12")
        if np.any(svar < 0.0):
            raise ValidationError("specific_var has negative entries")
        if p > 0:
            eigs = np.linalg.eigvalsh(fcov)
            lo, hi = float(eigs[0]), float(eigs[-1])
            if lo < -1e-10 * max(hi, 0.0):
                raise ValidationError(
                    f"factor_cov is not positive semidefinite: min eigenvalue {lo:.3e}"
                )
        _set(self, beta=beta, factor_cov=fcov, specific_var=svar)

    @property
    def n_assets(self):
        return self.beta.shape[0]

    @property
    def n_factors(self):
        return self.beta.shape[1]


def risk_matvec(model: FactorRiskModel, v) -> np.ndarray:
    """Apply the factor-structured covariance to a vector in O(n*p).

    Returns ``beta @ (factor_cov @ (beta.T @ v)) + specific_var * v``
    without forming the n-by-n matrix.
    """
    v = _vector(v, model.n_assets, "asset")
    t = model.beta.T @ v
    return model.beta @ (model.factor_cov @ t) + model.specific_var * v


@dataclass(frozen=True)
class ExposureConstraints:
    """Linear exposure bounds lower <= a @ w <= upper; m = 0 means no rows."""

    a: np.ndarray      # (m, n)
    lower: np.ndarray  # (m,)
    upper: np.ndarray  # (m,)

    def __post_init__(self):
        a = _readonly(self.a, ndim=2, name="a")
        lower = _readonly(self.lower, ndim=1, name="lower")
        upper = _readonly(self.upper, ndim=1, name="upper")
        m = a.shape[0]
        if lower.shape[0] != m:
            raise DimensionMismatchError("exposure row", m, lower.shape[0])
        if upper.shape[0] != m:
            raise DimensionMismatchError("exposure row", m, upper.shape[0])
        if np.any(lower > upper):
            j = int(np.argmax(lower - upper))
            raise ValidationError(f"exposure row {j}: lower {lower[j]} > upper {upper[j]}")
        _set(self, a=a, lower=lower, upper=upper)

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def n(self):
        return self.a.shape[1]


def _exposure_violation(exposures: ExposureConstraints, w) -> float:
    if exposures.m == 0:
        return 0.0
    aw = exposures.a @ w
    under = np.max(exposures.lower - aw, initial=0.0)
    over = np.max(aw - exposures.upper, initial=0.0)
    return float(max(under, over, 0.0))


def _budget_violation(w) -> float:
    return float(max(np.sum(np.abs(w)) - 1.0, 0.0))


def _check_common(alpha, risk, spread, impact, exponent, lambdas, exposures, w0, gmv):
    if not np.isfinite(gmv) or gmv <= 0.0:
        raise ValidationError(f"gmv must be positive, got {gmv}")
    n = alpha.shape[0]
    for name, arr in (("spread", spread), ("impact", impact), ("w0", w0)):
        if arr.shape[-1] != n:
            raise DimensionMismatchError("asset", n, arr.shape[-1])
    if risk.n_assets != n:
        raise DimensionMismatchError("asset", n, risk.n_assets)
    if exposures.m > 0 and exposures.n != n:
        raise DimensionMismatchError("asset", n, exposures.n)
    if np.any(spread < 0.0):
        raise ValidationError("spread has negative entries")
    if np.any(impact < 0.0):
        raise ValidationError("impact has negative entries")
    if not (1.0 < exponent <= 2.0):
        raise ValidationError(f"exponent must lie in (1, 2], got {exponent}")
    for name, lam in zip(("lambda1", "lambda2", "lambda3"), lambdas):
        if not np.isfinite(lam) or lam < 0.0:
            raise ValidationError(f"{name} must be >= 0, got {lam}")
    if np.sum(np.abs(w0)) > 1.0 + 1e-9:
        raise ValidationError(
            f"initial book violates the budget: l1 norm {np.sum(np.abs(w0)):.12f} > 1"
        )


@dataclass(frozen=True)
class SinglePeriodProblem:
    """One-step rebalance: expected return vs risk, spread cost, and impact cost."""

    gmv: float
    alpha: np.ndarray    # (n,) expected returns
    risk: FactorRiskModel
    spread: np.ndarray   # (n,) one-way spread cost coefficients
    impact: np.ndarray   # (n,) impact cost coefficients
    exponent: float      # impact exponent in (1, 2]
    lambda1: float
    lambda2: float
    lambda3: float
    exposures: ExposureConstraints
    w0: np.ndarray       # (n,) initial weights, fractions of gross value

    def __post_init__(self):
        alpha = _readonly(self.alpha, ndim=1, name="alpha")
        spread = _readonly(self.spread, ndim=1, name="spread")
        impact = _readonly(self.impact, ndim=1, name="impact")
        w0 = _readonly(self.w0, ndim=1, name="w0")
        gmv = float(self.gmv)
        exponent = float(self.exponent)
        lams = (float(self.lambda1), float(self.lambda2), float(self.lambda3))
        _check_common(alpha, self.risk, spread, impact, exponent, lams,
                      self.exposures, w0, gmv)
        _set(self, gmv=gmv, alpha=alpha, spread=spread, impact=impact,
             exponent=exponent, lambda1=lams[0], lambda2=lams[1], lambda3=lams[2],
             w0=w0)

    @property
    def n(self):
        return self.alpha.shape[0]


@dataclass(frozen=True)
class MultiPeriodProblem:
    """Rebalancing trajectory between fixed endpoints with per-period costs.

    Decision variables are the intermediate portfolios for periods
    1..horizon-1; ``w0`` and ``w_terminal`` are data. Per-period cost
    vectors have ``horizon`` rows: row t-1 prices the trade into period t,
    including the final forced trade into ``w_terminal``.
    """

    gmv: float
    horizon: int
    alpha_t: np.ndarray   # (T, n)
    risk: FactorRiskModel
    spread_t: np.ndarray  # (T, n)
    impact_t: np.ndarray  # (T, n)
    exponent: float
    lambda1: float
    lambda2: float
    lambda3: float
    exposures: ExposureConstraints
    w0: np.ndarray
    w_terminal: np.ndarray

    def __post_init__(self):
        horizon = int(self.horizon)
        if horizon < 2:
            raise ValidationError(f"horizon must be >= 2, got {horizon}")
        alpha_t = _readonly(self.alpha_t, ndim=2, name="alpha_t")
        spread_t = _readonly(self.spread_t, ndim=2, name="spread_t")
        impact_t = _readonly(self.impact_t, ndim=2, name="impact_t")
        w0 = _readonly(self.w0, ndim=1, name="w0")
        w_term = _readonly(self.w_terminal, ndim=1, name="w_terminal")
        n = alpha_t.shape[1]
        for name, arr in (("alpha_t", alpha_t), ("spread_t", spread_t), ("impact_t", impact_t)):
            if arr.shape[0] != horizon:
                raise DimensionMismatchError("period", horizon, arr.shape[0])
        if w_term.shape[0] != n:
            raise DimensionMismatchError("asset", n, w_term.shape[0])
        gmv = float(self.gmv)
        exponent = float(self.exponent)
        lams = (float(self.lambda1), float(self.lambda2), float(self.lambda3))
        _check_common(alpha_t[0], self.risk, spread_t[0], impact_t[0], exponent,
                      lams, self.exposures, w0, gmv)
        if np.any(spread_t < 0.0) or np.any(impact_t < 0.0):
            raise ValidationError("per-period cost vectors must be nonnegative")
        term_exp = _exposure_violation(self.exposures, w_term)
        term_bud = _budget_violation(w_term)
        if max(term_exp, term_bud) > 1e-9:
            raise ValidationError(
                "w_terminal must itself be feasible: exposure violation "
                f"{term_exp:.3e}, budget violation {term_bud:.3e} (tolerance 1e-9)"
            )
        _set(self, gmv=gmv, horizon=horizon, alpha_t=alpha_t, spread_t=spread_t,
             impact_t=impact_t, exponent=exponent, lambda1=lams[0],
             lambda2=lams[1], lambda3=lams[2], w0=w0, w_terminal=w_term)

    @property
    def n(self):
        return self.alpha_t.shape[1]


@dataclass(frozen=True)
class FeasibilityReport:
    max_exposure_violation: float
    budget_violation: float
    feasible: bool


def eval_single_objective(problem: SinglePeriodProblem, w) -> float:
    """Objective value at w, in currency units. Pure; no feasibility check."""
    w = _vector(w, problem.n, "asset")
    dw = np.abs(w - problem.w0)
    lam1bar = problem.lambda1 * problem.gmv
    val = (
        problem.alpha @ w
        - lam1bar * (w @ risk_matvec(problem.risk, w))
        - problem.lambda2 * (problem.spread @ dw)
        - problem.lambda3 * (problem.impact @ abs_power(dw, problem.exponent))
    )
    return float(problem.gmv * val)


def _trajectory(problem: MultiPeriodProblem, trajectory) -> np.ndarray:
    traj = np.asarray(trajectory, dtype=np.float64)
    tm1 = problem.horizon - 1
    if traj.ndim == 1 and tm1 == 1:
        traj = traj.reshape(1, -1)
    if traj.ndim != 2 or traj.shape[0] != tm1:
        got = traj.shape[0] if traj.ndim >= 1 else 0
        raise DimensionMismatchError("period", tm1, got)
    if traj.shape[1] != problem.n:
        raise DimensionMismatchError("asset", problem.n, traj.shape[1])
    return traj


def eval_multi_objective(problem: MultiPeriodProblem, trajectory) -> float:
    """Trajectory objective in currency units; endpoints come from the problem.

    Sums per-period return, risk relative to the terminal target (zero in
    the final period), and trade costs on each increment including the
    forced final trade into the terminal portfolio.
    """
    traj = _trajectory(problem, trajectory)
    horizon = problem.horizon
    lam1bar = problem.lambda1 * problem.gmv
    total = 0.0
    prev = problem.w0
    for t in range(1, horizon + 1):
        w_t = problem.w_terminal if t == horizon else traj[t - 1]
        total += float(problem.alpha_t[t - 1] @ w_t)
        if t < horizon:
            dv = w_t - problem.w_terminal
            total -= lam1bar * float(dv @ risk_matvec(problem.risk, dv))
        step = np.abs(w_t - prev)
        total -= problem.lambda2 * float(problem.spread_t[t - 1] @ step)
        total -= problem.lambda3 * float(
            problem.impact_t[t - 1] @ abs_power(step, problem.exponent)
        )
        prev = w_t
    return float(problem.gmv * total)


def check_feasibility(problem, point, tolerance) -> FeasibilityReport:
    """Report worst-case exposure and budget violations at the given point.

    For a trajectory, only the intermediate periods are checked (the
    endpoints are data, not decisions).
    """
    if tolerance <= 0.0:
        raise ValidationError(f"tolerance must be positive, got {tolerance}")
    if isinstance(problem, MultiPeriodProblem):
        rows = _trajectory(problem, point)
    else:
        rows = _vector(point, problem.n, "asset").reshape(1, -1)
    exp_v = 0.0
    bud_v = 0.0
    for w in rows:
        exp_v = max(exp_v, _exposure_violation(problem.exposures, w))
        bud_v = max(bud_v, _budget_violation(w))
    return FeasibilityReport(
        max_exposure_violation=exp_v,
        budget_violation=bud_v,
        feasible=bool(exp_v <= tolerance and bud_v <= tolerance),
    )
