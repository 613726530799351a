"""Proximal operators and projections composed by the splitting solver.

Four maps: the spread-plus-power-impact trade-cost prox (scalar and
separable vector forms), Euclidean projection onto an l1 ball, box
projection, and the conjugate-prox transform via the Moreau identity.
All are pure and reentrant.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "TradeCostCoeffs",
    "prox_trade_cost_1d",
    "prox_trade_cost_vec",
    "project_l1_ball",
    "project_box",
    "conjugate_prox",
]


@dataclass(frozen=True)
class TradeCostCoeffs:
    """Per-asset trade-cost data: c1*|y - anchor| + c2*|y - anchor|**exponent."""

    anchor: float
    spread_coeff: float
    impact_coeff: float
    exponent: float

    def __post_init__(self):
        if not np.isfinite(self.anchor):
            raise ValidationError(f"anchor must be finite, got {self.anchor}")
        if not (np.isfinite(self.spread_coeff) and self.spread_coeff >= 0.0):
            raise ValidationError(f"spread_coeff must be >= 0, got {self.spread_coeff}")
        if not (np.isfinite(self.impact_coeff) and self.impact_coeff >= 0.0):
            raise ValidationError(f"impact_coeff must be >= 0, got {self.impact_coeff}")
        if not (1.0 < self.exponent <= 2.0):
            raise ValidationError(f"exponent must lie in (1, 2], got {self.exponent}")


def _kernels():
    if _accel.BACKEND == "numba":
        from . import _prox_numba as mod
    else:
        from . import _prox_numpy as mod
    return mod


def _check_step(step):
    if not (np.isfinite(step) and step > 0.0):
        raise ValidationError(f"step must be positive and finite, got {step}")


def prox_trade_cost_1d(x, step, coeffs: TradeCostCoeffs) -> float:
    """Unique minimizer of (1/2*step)*(y - x)**2 + trade cost at x.

    Soft-thresholds into the no-trade dead zone when the pull is within
    step * spread_coeff of the anchor; otherwise solves the strictly
    increasing first-order condition by safeguarded Newton (closed forms
    for a pure spread cost and for exponent exactly 2).
    """
    if not np.isfinite(x):
        raise ValidationError(f"input must be finite, got {x}")
    _check_step(step)
    mod = _kernels()
    if _accel.BACKEND == "numba":
        return float(mod.prox_trade_cost_scalar(
            float(x), float(step), coeffs.anchor, coeffs.spread_coeff,
            coeffs.impact_coeff, coeffs.exponent,
        ))
    out = mod.prox_trade_cost_vector(
        np.array([float(x)]), float(step), np.array([coeffs.anchor]),
        np.array([coeffs.spread_coeff]), np.array([coeffs.impact_coeff]),
        np.array([coeffs.exponent]),
    )
    return float(out[0])


def prox_trade_cost_vec(x, step, coeffs) -> np.ndarray:
    """Elementwise trade-cost prox; coeffs is a sequence of TradeCostCoeffs."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"x must be a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("input contains non-finite entries")
    _check_step(step)
    coeffs = list(coeffs)
    if len(coeffs) != x.shape[0]:
        raise DimensionMismatchError("coefficient", x.shape[0], len(coeffs))
    anchor = np.array([c.anchor for c in coeffs])
    c1 = np.array([c.spread_coeff for c in coeffs])
    c2 = np.array([c.impact_coeff for c in coeffs])
    d = np.array([c.exponent for c in coeffs])
    return _kernels().prox_trade_cost_vector(x, float(step), anchor, c1, c2, d)


def project_l1_ball(v, radius) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValidationError("input contains non-finite entries")
    if not (np.isfinite(radius) and radius > 0.0):
        raise ValidationError(f"radius must be positive, got {radius}")
    return _kernels().project_l1_ball_impl(np.ascontiguousarray(v), float(radius))


def project_box(z, lower, upper) -> np.ndarray:
    """Elementwise clamp of z into [lower, upper]."""
    z = np.asarray(z, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if lower.shape != z.shape or upper.shape != z.shape:
        raise DimensionMismatchError("bound", z.shape[0], lower.shape[0])
    if np.any(lower > upper):
        j = int(np.argmax(lower - upper))
        raise ValidationError(f"bound {j} inverted: lower {lower[j]} > upper {upper[j]}")
    return _kernels().project_box_impl(
        np.ascontiguousarray(z), np.ascontiguousarray(lower), np.ascontiguousarray(upper)
    )


def conjugate_prox(prox_of_primal, y, sigma) -> np.ndarray:
    """Prox of the scaled convex conjugate via the Moreau identity.

    prox_{sigma*h*}(y) = y - sigma * prox_{h/sigma}(y/sigma), where
    ``prox_of_primal(x, step)`` evaluates prox_{step*h}(x).
    """
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise ValidationError(f"sigma must be positive, got {sigma}")
    y = np.asarray(y, dtype=np.float64)
    inner = np.asarray(prox_of_primal(y / sigma, 1.0 / sigma), dtype=np.float64)
    return y - sigma * inner
