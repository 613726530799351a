"""Vectorized numpy twins of the solver iteration kernels.

Same contract as the numba kernels: advance the state arrays in place,
check the residual every ``stride`` passes, return
(iterations_done, checks_written, last_residual, flag).
"""

import numpy as np

from ._prox_numpy import project_l1_ball_impl, prox_trade_cost_vector


def _residual(dw, nw, dy, ny, tau, sigma):
    return max(dw / (tau * (1.0 + nw)), dy / (sigma * (1.0 + ny)))


def run_single(w, y1, y2, alpha, beta, fcov, svar, lam1bar,
               c1, c2, d, a_mat, lo, hi, w0,
               tau, sigma, eps, stride, max_iters, res_out):
    m = lo.shape[0]
    inv_sigma = 1.0 / sigma
    checks = 0
    last_res = np.inf
    it = 0
    while it < max_iters:
        it += 1
        grad = -alpha + 2.0 * lam1bar * (beta @ (fcov @ (w @ beta)) + svar * w)
        kty = y1 + (y2 @ a_mat) if m > 0 else y1.copy()
        wn = project_l1_ball_impl(w - tau * (grad + kty), 1.0)
        wbar = 2.0 * wn - w
        z1 = y1 + sigma * wbar
        y1n = z1 - sigma * prox_trade_cost_vector(z1 * inv_sigma, inv_sigma, w0, c1, c2, d)
        if m > 0:
            z2 = y2 + sigma * (a_mat @ wbar)
            y2n = z2 - sigma * np.minimum(np.maximum(z2 * inv_sigma, lo), hi)
        else:
            y2n = y2
        if it % stride == 0:
            dw = np.max(np.abs(wn - w), initial=0.0)
            nw = np.max(np.abs(w), initial=0.0)
            dy = max(np.max(np.abs(y1n - y1), initial=0.0),
                     np.max(np.abs(y2n - y2), initial=0.0))
            ny = max(np.max(np.abs(y1), initial=0.0),
                     np.max(np.abs(y2), initial=0.0))
            res = _residual(dw, nw, dy, ny, tau, sigma)
            res_out[checks] = res
            checks += 1
            last_res = res
            w[:] = wn
            y1[:] = y1n
            if m > 0:
                y2[:] = y2n
            if not np.isfinite(res):
                return it, checks, res, 2
            if res <= eps:
                return it, checks, res, 1
        else:
            w[:] = wn
            y1[:] = y1n
            if m > 0:
                y2[:] = y2n
    return it, checks, last_res, 0


def run_multi(W, yd, ye, alpha, beta, fcov, svar, lam1bar,
              c1, c2, d, anchors, a_mat, lo, hi, w_term,
              tau, sigma, eps, stride, max_iters, res_out):
    tm1, n = W.shape
    m = lo.shape[0]
    inv_sigma = 1.0 / sigma
    checks = 0
    last_res = np.inf
    it = 0
    while it < max_iters:
        it += 1
        dv = W - w_term
        grad = -alpha + 2.0 * lam1bar * ((dv @ beta) @ fcov @ beta.T + dv * svar)
        kty = yd[:-1] - yd[1:]
        if m > 0:
            kty = kty + ye @ a_mat
        arg = W - tau * (grad + kty)
        Wn = np.empty_like(W)
        for t in range(tm1):
            Wn[t] = project_l1_ball_impl(arg[t], 1.0)
        Wb = 2.0 * Wn - W
        z = np.empty_like(yd)
        z[0] = Wb[0]
        z[1:tm1] = Wb[1:] - Wb[:-1]
        z[tm1] = -Wb[tm1 - 1]
        val = yd + sigma * z
        ydn = val - sigma * prox_trade_cost_vector(
            val * inv_sigma, inv_sigma, anchors, c1, c2, d)
        if m > 0:
            z2 = ye + sigma * (Wb @ a_mat.T)
            yen = z2 - sigma * np.minimum(np.maximum(z2 * inv_sigma, lo), hi)
        else:
            yen = ye
        if it % stride == 0:
            dw = np.max(np.abs(Wn - W), initial=0.0)
            nw = np.max(np.abs(W), initial=0.0)
            dy = max(np.max(np.abs(ydn - yd), initial=0.0),
                     np.max(np.abs(yen - ye), initial=0.0))
            ny = max(np.max(np.abs(yd), initial=0.0),
                     np.max(np.abs(ye), initial=0.0))
            res = _residual(dw, nw, dy, ny, tau, sigma)
            res_out[checks] = res
            checks += 1
            last_res = res
            W[:] = Wn
            yd[:] = ydn
            if m > 0:
                ye[:] = yen
            if not np.isfinite(res):
                return it, checks, res, 2
            if res <= eps:
                return it, checks, res, 1
        else:
            W[:] = Wn
            yd[:] = ydn
            if m > 0:
                ye[:] = yen
    return it, checks, last_res, 0
