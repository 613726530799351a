"""Pure-numpy fallback kernels for the proximal maps and projections.

Vectorized twins of the numba kernels: the masked Newton iteration below
applies the identical update and per-element stopping rule, so both
backends produce matching results.
"""

import numpy as np

NEWTON_TOL = 1e-14
NEWTON_MAX_ITERS = 100


def prox_trade_cost_vector(x, tau, anchor, c1, c2, d):
    x, anchor, c1, c2, d = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), anchor, c1, c2, d
    )
    shape = x.shape
    x = x.ravel()
    anchor = np.asarray(anchor, dtype=np.float64).ravel()
    c1 = np.asarray(c1, dtype=np.float64).ravel()
    c2 = np.asarray(c2, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()

    v = x - anchor
    av = np.abs(v)
    thr = tau * c1
    sgn = np.where(v > 0.0, 1.0, -1.0)
    u = np.zeros_like(av)

    active = av > thr
    soft = active & (c2 == 0.0)
    u[soft] = av[soft] - thr[soft]
    quad = active & (c2 != 0.0) & (d == 2.0)
    u[quad] = (av[quad] - thr[quad]) / (1.0 + 2.0 * tau * c2[quad])
    half = active & (c2 != 0.0) & (d == 1.5)
    if np.any(half):
        # u + thr + tcd*sqrt(u) = av is quadratic in sqrt(u)
        tcd = tau * c2[half] * d[half]
        r = 0.5 * (-tcd + np.sqrt(tcd * tcd + 4.0 * (av[half] - thr[half])))
        u[half] = r * r
    newton = active & (c2 != 0.0) & (d != 2.0) & (d != 1.5)
    if np.any(newton):
        idx = np.flatnonzero(newton)
        u[idx] = _newton_root(av[idx], thr[idx], tau, c2[idx], d[idx])
    return (anchor + sgn * u).reshape(shape)


def _newton_root(av, thr, tau, c2, d):
    delta = av - thr
    tcd = tau * c2 * d
    dm1 = d - 1.0
    lo = np.zeros_like(av)
    hi = np.minimum(delta, np.exp(np.log(delta / tcd) / dm1))
    u = hi.copy()
    gtol = NEWTON_TOL * (1.0 + av)
    live = np.flatnonzero(hi > 0.0)  # underflowed brackets stay at zero
    for _ in range(NEWTON_MAX_ITERS):
        if live.size == 0:
            break
        ul = u[live]
        p = np.exp(dm1[live] * np.log(ul))
        g = ul + tcd[live] * p - delta[live]
        pos = g > 0.0
        hi[live] = np.where(pos, ul, hi[live])
        lo[live] = np.where(pos, lo[live], ul)
        done = np.abs(g) <= gtol[live]
        gp = 1.0 + tcd[live] * dm1[live] * p / ul
        nxt = ul - g / gp
        inside = (lo[live] < nxt) & (nxt < hi[live])
        nxt = np.where(inside, nxt, 0.5 * (lo[live] + hi[live]))
        u[live] = np.where(done, ul, nxt)
        live = live[~done]
    return u


def project_l1_ball_impl(v, radius):
    v = np.asarray(v, dtype=np.float64)
    av = np.abs(v)
    if float(np.sum(av)) <= radius:
        return v.copy()
    mu = np.sort(av)[::-1]
    css = np.cumsum(mu)
    k = np.arange(1, v.shape[0] + 1, dtype=np.float64)
    t = (css - radius) / k
    rho = int(np.max(np.nonzero(mu > t)[0])) + 1
    theta = t[rho - 1]
    a = np.maximum(av - theta, 0.0)
    return np.where(v > 0.0, a, -a)


def project_box_impl(z, lower, upper):
    return np.minimum(np.maximum(np.asarray(z, dtype=np.float64), lower), upper)
