"""Numba iteration kernels for the primal-dual solver.

Each kernel advances the iteration in place for up to ``max_iters``
passes, computing the fixed-point residual every ``stride`` passes and
writing it into ``res_out``. Return value is

    (iterations_done, checks_written, last_residual, flag)

with flag 0 = budget exhausted, 1 = converged, 2 = non-finite residual.
State arrays are mutated so a driver can call the kernel in chunks (for
wall-clock checks) without perturbing the iterate sequence.

Inner loops are allocation free: all scratch buffers are set up once per
chunk, and the factor matvecs are hand-rolled (they beat BLAS dispatch
at desk-scale shapes).
"""

import numpy as np
from numba import njit

from ._prox_numba import prox_trade_cost_scalar


@njit(cache=True)
def _project_l1_into(v, radius, out, scratch):
    # Euclidean projection of v onto the l1 ball, written into out
    n = v.shape[0]
    total = 0.0
    for i in range(n):
        total += abs(v[i])
    if total <= radius:
        for i in range(n):
            out[i] = v[i]
        return
    for i in range(n):
        scratch[i] = abs(v[i])
    scratch.sort()
    css = 0.0
    theta = 0.0
    for j in range(n):
        mu = scratch[n - 1 - j]
        css += mu
        t = (css - radius) / (j + 1.0)
        if mu > t:
            theta = t
        else:
            break
    for i in range(n):
        a = abs(v[i]) - theta
        if a < 0.0:
            a = 0.0
        out[i] = a if v[i] > 0.0 else -a


@njit(cache=True)
def _risk_into(beta, fcov, svar, lam1bar, v, tp, tp2, out):
    # out = 2*lam1bar*(beta @ fcov @ beta.T + diag(svar)) @ v
    n, p = beta.shape
    for k in range(p):
        s = 0.0
        for i in range(n):
            s += v[i] * beta[i, k]
        tp[k] = s
    for k in range(p):
        s = 0.0
        for j in range(p):
            s += fcov[k, j] * tp[j]
        tp2[k] = s
    two_lam = 2.0 * lam1bar
    for i in range(n):
        s = 0.0
        for k in range(p):
            s += beta[i, k] * tp2[k]
        out[i] = two_lam * (s + svar[i] * v[i])


@njit(cache=True)
def run_single(w, y1, y2, alpha, beta, fcov, svar, lam1bar,
               c1, c2, d, a_mat, lo, hi, w0,
               tau, sigma, eps, stride, max_iters, res_out):
    n = w.shape[0]
    m = lo.shape[0]
    p = beta.shape[1]
    inv_sigma = 1.0 / sigma
    checks = 0
    last_res = np.inf
    it = 0
    tp = np.empty(p)
    tp2 = np.empty(p)
    grad = np.empty(n)
    aty = np.zeros(n)
    arg = np.empty(n)
    wn = np.empty(n)
    wbar = np.empty(n)
    y1n = np.empty(n)
    y2n = np.empty(m)
    aw = np.empty(m)
    scratch = np.empty(n)
    while it < max_iters:
        it += 1
        _risk_into(beta, fcov, svar, lam1bar, w, tp, tp2, grad)
        if m > 0:
            for i in range(n):
                aty[i] = 0.0
            for j in range(m):
                yj = y2[j]
                for i in range(n):
                    aty[i] += yj * a_mat[j, i]
        for i in range(n):
            arg[i] = w[i] - tau * (grad[i] - alpha[i] + y1[i] + aty[i])
        _project_l1_into(arg, 1.0, wn, scratch)
        for i in range(n):
            wbar[i] = 2.0 * wn[i] - w[i]
        for i in range(n):
            z = y1[i] + sigma * wbar[i]
            y1n[i] = z - sigma * prox_trade_cost_scalar(
                z * inv_sigma, inv_sigma, w0[i], c1[i], c2[i], d)
        for j in range(m):
            s = 0.0
            for i in range(n):
                s += a_mat[j, i] * wbar[i]
            z = y2[j] + sigma * s
            zz = z * inv_sigma
            if zz < lo[j]:
                zz = lo[j]
            elif zz > hi[j]:
                zz = hi[j]
            y2n[j] = z - sigma * zz
        if it % stride == 0:
            dw = 0.0
            nw = 0.0
            for i in range(n):
                x = abs(wn[i] - w[i])
                if x > dw:
                    dw = x
                x = abs(w[i])
                if x > nw:
                    nw = x
            dy = 0.0
            ny = 0.0
            for i in range(n):
                x = abs(y1n[i] - y1[i])
                if x > dy:
                    dy = x
                x = abs(y1[i])
                if x > ny:
                    ny = x
            for j in range(m):
                x = abs(y2n[j] - y2[j])
                if x > dy:
                    dy = x
                x = abs(y2[j])
                if x > ny:
                    ny = x
            res = dw / (tau * (1.0 + nw))
            rd = dy / (sigma * (1.0 + ny))
            if rd > res:
                res = rd
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


@njit(cache=True)
def run_multi(W, yd, ye, alpha, beta, fcov, svar, lam1bar,
              c1, c2, d, anchors, a_mat, lo, hi, w_term,
              tau, sigma, eps, stride, max_iters, res_out):
    tm1 = W.shape[0]   # decision periods
    n = W.shape[1]
    tt = tm1 + 1       # trade increments, incl. the forced final trade
    m = lo.shape[0]
    p = beta.shape[1]
    inv_sigma = 1.0 / sigma
    checks = 0
    last_res = np.inf
    it = 0
    tp = np.empty(p)
    tp2 = np.empty(p)
    dv = np.empty(n)
    grad = np.empty(n)
    aty = np.zeros(n)
    arg = np.empty(n)
    scratch = np.empty(n)
    Wn = np.empty_like(W)
    Wb = np.empty_like(W)
    ydn = np.empty_like(yd)
    yen = np.empty_like(ye)
    while it < max_iters:
        it += 1
        for t in range(tm1):
            for i in range(n):
                dv[i] = W[t, i] - w_term[i]
            _risk_into(beta, fcov, svar, lam1bar, dv, tp, tp2, grad)
            if m > 0:
                for i in range(n):
                    aty[i] = 0.0
                for j in range(m):
                    yj = ye[t, j]
                    for i in range(n):
                        aty[i] += yj * a_mat[j, i]
            for i in range(n):
                kty = yd[t, i] - yd[t + 1, i] + aty[i]
                arg[i] = W[t, i] - tau * (grad[i] - alpha[t, i] + kty)
            _project_l1_into(arg, 1.0, Wn[t], scratch)
            for i in range(n):
                Wb[t, i] = 2.0 * Wn[t, i] - W[t, i]
        # dual, one trade-cost block per increment
        for b in range(tt):
            for i in range(n):
                if b == 0:
                    z = Wb[0, i]
                elif b < tt - 1:
                    z = Wb[b, i] - Wb[b - 1, i]
                else:
                    z = -Wb[tm1 - 1, i]
                val = yd[b, i] + sigma * z
                ydn[b, i] = val - sigma * prox_trade_cost_scalar(
                    val * inv_sigma, inv_sigma, anchors[b, i], c1[b, i], c2[b, i], d)
        # dual, per-period exposure blocks
        for t in range(tm1):
            for j in range(m):
                s = 0.0
                for i in range(n):
                    s += a_mat[j, i] * Wb[t, i]
                z = ye[t, j] + sigma * s
                zz = z * inv_sigma
                if zz < lo[j]:
                    zz = lo[j]
                elif zz > hi[j]:
                    zz = hi[j]
                yen[t, j] = z - sigma * zz
        if it % stride == 0:
            dw = 0.0
            nw = 0.0
            for t in range(tm1):
                for i in range(n):
                    x = abs(Wn[t, i] - W[t, i])
                    if x > dw:
                        dw = x
                    x = abs(W[t, i])
                    if x > nw:
                        nw = x
            dy = 0.0
            ny = 0.0
            for b in range(tt):
                for i in range(n):
                    x = abs(ydn[b, i] - yd[b, i])
                    if x > dy:
                        dy = x
                    x = abs(yd[b, i])
                    if x > ny:
                        ny = x
            for t in range(tm1):
                for j in range(m):
                    x = abs(yen[t, j] - ye[t, j])
                    if x > dy:
                        dy = x
                    x = abs(ye[t, j])
                    if x > ny:
                        ny = x
            res = dw / (tau * (1.0 + nw))
            rd = dy / (sigma * (1.0 + ny))
            if rd > res:
                res = rd
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
