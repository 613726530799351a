"""Numba kernels for the proximal maps and projections.

These are the scalar/loop forms; the vectorized numpy twins live in
_prox_numpy and follow the same update and stopping rules element for
element so the two backends agree to roundoff.
"""

import numpy as np
from numba import njit

from ._prox_numpy import NEWTON_MAX_ITERS, NEWTON_TOL


@njit(cache=True)
def prox_trade_cost_scalar(x, tau, anchor, c1, c2, d):
    # argmin over y of (1/2 tau)(y - x)^2 + c1|y - anchor| + c2|y - anchor|^d
    v = x - anchor
    av = abs(v)
    thr = tau * c1
    if av <= thr:
        return anchor
    sgn = 1.0 if v > 0.0 else -1.0
    if c2 == 0.0:
        return anchor + sgn * (av - thr)
    if d == 2.0:
        return anchor + sgn * (av - thr) / (1.0 + 2.0 * tau * c2)
    tcd = tau * c2 * d
    if d == 1.5:
        # u + thr + tcd*sqrt(u) = av is quadratic in sqrt(u)
        r = 0.5 * (-tcd + np.sqrt(tcd * tcd + 4.0 * (av - thr)))
        return anchor + sgn * r * r
    # g(u) = u + thr + tau*c2*d*u^(d-1) - av is strictly increasing with
    # g(0+) < 0; safeguarded Newton from a tight upper bracket (the root
    # is below both delta and (delta/tcd)^(1/(d-1)), which covers the
    # near-threshold regime where the root collapses toward zero),
    # stopping on the optimality-equation residual.
    delta = av - thr
    dm1 = d - 1.0
    lo = 0.0
    hi = delta
    cap = np.exp(np.log(delta / tcd) / dm1)
    if cap < hi:
        hi = cap
    if hi <= 0.0:
        return anchor  # root below double precision
    gtol = NEWTON_TOL * (1.0 + av)
    u = hi
    for _ in range(NEWTON_MAX_ITERS):
        p = np.exp(dm1 * np.log(u))
        g = u + tcd * p - delta
        if g > 0.0:
            hi = u
        else:
            lo = u
        if abs(g) <= gtol:
            break
        gp = 1.0 + tcd * dm1 * p / u
        nxt = u - g / gp
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        u = nxt
    return anchor + sgn * u


@njit(cache=True)
def prox_trade_cost_vector(x, tau, anchor, c1, c2, d):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = prox_trade_cost_scalar(x[i], tau, anchor[i], c1[i], c2[i], d[i])
    return out


@njit(cache=True)
def project_l1_ball_impl(v, radius):
    n = v.shape[0]
    total = 0.0
    for i in range(n):
        total += abs(v[i])
    if total <= radius:
        return v.copy()
    mu = np.sort(np.abs(v))  # ascending; walk from the top
    css = 0.0
    theta = 0.0
    for j in range(n):
        m = mu[n - 1 - j]
        css += m
        t = (css - radius) / (j + 1.0)
        if m > t:
            theta = t
        else:
            break
    out = np.empty(n)
    for i in range(n):
        a = abs(v[i]) - theta
        if a < 0.0:
            a = 0.0
        out[i] = a if v[i] > 0.0 else -a
    return out


@njit(cache=True)
def project_box_impl(z, lower, upper):
    out = np.empty(z.shape[0])
    for j in range(z.shape[0]):
        x = z[j]
        if x < lower[j]:
            x = lower[j]
        elif x > upper[j]:
            x = upper[j]
        out[j] = x
    return out
