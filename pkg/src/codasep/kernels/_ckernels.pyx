# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror ``_pykernels`` exactly.

Rank/AUC arithmetic works on half-integers, so the compiled and numpy
backends return bit-identical AUCs; iterative solvers agree to solver
tolerance.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt

cnp.import_array()

cdef double P_FLOOR = 1e-300
cdef double ONE_MINUS = 1.0 - 1.1102230246251565e-16  # largest double < 1


cdef void _midrank_into(double[::1] vals, cnp.intp_t[::1] order, double[::1] out):
    cdef Py_ssize_t n = vals.shape[0]
    cdef Py_ssize_t i = 0, j, t
    cdef double mid
    while i < n:
        j = i
        while j + 1 < n and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        mid = 0.5 * (i + j) + 1.0
        for t in range(i, j + 1):
            out[order[t]] = mid
        i = j + 1


def mannwhitney_auc(double[::1] scores, unsigned char[::1] pos):
    """AUC with half credit for ties, via the rank-sum identity."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t i, n1 = 0
    for i in range(n):
        if pos[i]:
            n1 += 1
    cdef Py_ssize_t n0 = n - n1
    order_arr = np.argsort(np.asarray(scores), kind="stable")
    cdef cnp.intp_t[::1] order = order_arr
    ranks_arr = np.empty(n)
    cdef double[::1] ranks = ranks_arr
    _midrank_into(scores, order, ranks)
    cdef double rank_sum = 0.0
    for i in range(n):
        if pos[i]:
            rank_sum += ranks[i]
    return (rank_sum - 0.5 * n1 * (n1 + 1)) / (<double> n1 * n0)


def delong_auc_variance(double[::1] scores, unsigned char[::1] pos):
    """AUC and its DeLong variance from placement components V_i, W_j."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t i, n1 = 0
    for i in range(n):
        if pos[i]:
            n1 += 1
    cdef Py_ssize_t n0 = n - n1
    combined_arr = np.empty(n)
    cdef double[::1] combined = combined_arr
    cdef Py_ssize_t ip = 0, ineg = n1
    for i in range(n):
        if pos[i]:
            combined[ip] = scores[i]
            ip += 1
        else:
            combined[ineg] = scores[i]
            ineg += 1

    r_all_arr = np.empty(n)
    cdef double[::1] r_all = r_all_arr
    cdef cnp.intp_t[::1] order_all = np.argsort(combined_arr, kind="stable")
    _midrank_into(combined, order_all, r_all)

    pos_arr = combined_arr[:n1].copy()
    neg_arr = combined_arr[n1:].copy()
    cdef double[::1] spos = pos_arr
    cdef double[::1] sneg = neg_arr
    r_pos_arr = np.empty(n1)
    r_neg_arr = np.empty(n0)
    cdef double[::1] r_pos = r_pos_arr
    cdef double[::1] r_neg = r_neg_arr
    cdef cnp.intp_t[::1] order_pos = np.argsort(pos_arr, kind="stable")
    cdef cnp.intp_t[::1] order_neg = np.argsort(neg_arr, kind="stable")
    _midrank_into(spos, order_pos, r_pos)
    _midrank_into(sneg, order_neg, r_neg)

    cdef double rank_sum = 0.0
    for i in range(n1):
        rank_sum += r_all[i]
    cdef double auc = (rank_sum - 0.5 * n1 * (n1 + 1)) / (<double> n1 * n0)

    cdef double sv = 0.0, sw = 0.0, v, w
    for i in range(n1):
        v = (r_all[i] - r_pos[i]) / n0 - auc
        sv += v * v
    for i in range(n0):
        w = 1.0 - (r_all[n1 + i] - r_neg[i]) / n1 - auc
        sw += w * w
    return auc, sv / (<double> n1 * (n1 - 1)) + sw / (<double> n0 * (n0 - 1))


cdef void _compute_probs(double[:, ::1] x, double[:, ::1] beta, double[:, ::1] probs):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = beta.shape[0]
    cdef Py_ssize_t i, c, a
    cdef double eta, max_eta, base, total, v
    for i in range(n):
        max_eta = 0.0  # baseline eta
        for c in range(k):
            eta = 0.0
            for a in range(d):
                eta += beta[c, a] * x[i, a]
            probs[i, c] = eta
            if eta > max_eta:
                max_eta = eta
        total = 0.0
        for c in range(k):
            v = exp(probs[i, c] - max_eta)
            probs[i, c] = v
            total += v
        base = exp(-max_eta)
        total += base
        probs[i, k] = base
        for c in range(k + 1):
            v = probs[i, c] / total
            if v < P_FLOOR:
                v = P_FLOOR
            elif v > ONE_MINUS:
                v = ONE_MINUS
            probs[i, c] = v


cdef double _loglik(double[:, ::1] probs, cnp.int64_t[::1] y):
    cdef Py_ssize_t i, n = y.shape[0]
    cdef double total = 0.0
    for i in range(n):
        total += log(probs[i, y[i]])
    return total


cdef int _chol_solve(double[:, ::1] a, double[::1] b, double[::1] out, Py_ssize_t size):
    """Cholesky factor ``a`` in place (lower) and solve into ``out``; -1 on failure."""
    cdef Py_ssize_t i, j, t
    cdef double s
    for j in range(size):
        s = a[j, j]
        for t in range(j):
            s -= a[j, t] * a[j, t]
        if not s > 0.0:  # catches non-positive and NaN
            return -1
        a[j, j] = sqrt(s)
        for i in range(j + 1, size):
            s = a[i, j]
            for t in range(j):
                s -= a[i, t] * a[j, t]
            a[i, j] = s / a[j, j]
    for i in range(size):
        s = b[i]
        for t in range(i):
            s -= a[i, t] * out[t]
        out[i] = s / a[i, i]
    for i in range(size - 1, -1, -1):
        s = out[i]
        for t in range(i + 1, size):
            s -= a[t, i] * out[t]
        out[i] = s / a[i, i]
    return 0


def multinomial_newton(double[:, ::1] x, cnp.int64_t[::1] y, int n_classes,
                       int max_iter, double tol, double grad_tol,
                       double sep_threshold, double ridge):
    """Newton-Raphson for the baseline-category multinomial logit.

    Same contract as the numpy backend: step halving on likelihood
    descent, separation stop at |coefficient| > sep_threshold, ridge
    jitter on a singular Hessian.
    """
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef int k = n_classes - 1
    cdef Py_ssize_t kd = k * d

    beta_arr = np.zeros((k, d))
    probs_arr = np.empty((n, n_classes))
    cand_arr = np.empty((k, d))
    probs_new_arr = np.empty((n, n_classes))
    hess_arr = np.empty((kd, kd))
    work_arr = np.empty((kd, kd))
    grad_arr = np.empty(kd)
    step_arr = np.empty(kd)
    wbuf_arr = np.empty(n)

    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] probs = probs_arr
    cdef double[:, ::1] cand = cand_arr
    cdef double[:, ::1] probs_new = probs_new_arr
    cdef double[:, ::1] hess = hess_arr
    cdef double[:, ::1] work = work_arr
    cdef double[::1] grad = grad_arr
    cdef double[::1] step = step_arr
    cdef double[::1] wbuf = wbuf_arr

    _compute_probs(x, beta, probs)
    cdef double ll = _loglik(probs, y)
    cdef int iterations = 0
    cdef bint converged = False, separation = False, jittered = False
    cdef bint improved, solved
    cdef double rel_change = np.inf
    cdef Py_ssize_t i, a, b, c, c2, h
    cdef double g, gmax, s, scale, ll_new, delta

    while True:
        gmax = 0.0
        for c in range(k):
            for a in range(d):
                g = 0.0
                for i in range(n):
                    g += ((1.0 if y[i] == c else 0.0) - probs[i, c]) * x[i, a]
                grad[c * d + a] = g
                if fabs(g) > gmax:
                    gmax = fabs(g)
        if rel_change <= tol and gmax <= grad_tol:
            converged = True
            break
        if iterations >= max_iter:
            break

        for c in range(k):
            for c2 in range(c, k):
                for i in range(n):
                    wbuf[i] = probs[i, c] * ((1.0 if c == c2 else 0.0) - probs[i, c2])
                for a in range(d):
                    for b in range(a, d):
                        s = 0.0
                        for i in range(n):
                            s += wbuf[i] * x[i, a] * x[i, b]
                        hess[c * d + a, c2 * d + b] = s
                        hess[c * d + b, c2 * d + a] = s
                        hess[c2 * d + a, c * d + b] = s
                        hess[c2 * d + b, c * d + a] = s

        work_arr[:, :] = hess_arr
        solved = _chol_solve(work, grad, step, kd) == 0
        if not solved:
            jittered = True
            work_arr[:, :] = hess_arr
            for h in range(kd):
                work[h, h] += ridge
            solved = _chol_solve(work, grad, step, kd) == 0
        if not solved:
            break

        scale = 1.0
        improved = False
        for h in range(21):
            for c in range(k):
                for a in range(d):
                    cand[c, a] = beta[c, a] + scale * step[c * d + a]
            _compute_probs(x, cand, probs_new)
            ll_new = _loglik(probs_new, y)
            if ll_new >= ll:
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
        beta_arr[:, :] = cand_arr
        probs_arr[:, :] = probs_new_arr
        rel_change = fabs(ll_new - ll) / (fabs(ll_new) + 1e-12)
        ll = ll_new
        iterations += 1
        delta = 0.0
        for c in range(k):
            for a in range(d):
                if fabs(beta[c, a]) > delta:
                    delta = fabs(beta[c, a])
        if delta > sep_threshold:
            separation = True
            break

    return beta_arr, probs_arr, ll, iterations, bool(converged), bool(separation), bool(jittered)


cdef inline void _fill_col(double[:, ::1] logx, Py_ssize_t a, Py_ssize_t b,
                           double mu, double sc, double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = (logx[i, a] - logx[i, b] - mu) / sc


cdef double _cd_sweep(double[:, ::1] logx, cnp.int64_t[::1] pa, cnp.int64_t[::1] pb,
                      double[::1] mean, double[::1] scale, double[::1] theta,
                      double* intercept, double[::1] w, double[::1] r,
                      double[::1] xj, double lam1, double lam2,
                      cnp.int64_t[::1] idx, Py_ssize_t n_idx, Py_ssize_t n):
    cdef double max_delta, swr = 0.0, sw = 0.0, db
    cdef Py_ssize_t t, j, i
    cdef double wxx, wxr, wx, u, t_new, delta
    for i in range(n):
        swr += w[i] * r[i]
        sw += w[i]
    db = swr / sw
    intercept[0] += db
    for i in range(n):
        r[i] -= db
    max_delta = fabs(db)
    for t in range(n_idx):
        j = idx[t]
        if scale[j] <= 0.0:
            continue
        _fill_col(logx, pa[j], pb[j], mean[j], scale[j], xj, n)
        wxx = 0.0
        wxr = 0.0
        for i in range(n):
            wx = w[i] * xj[i]
            wxx += wx * xj[i]
            wxr += wx * r[i]
        wxx /= n
        u = wxr / n + wxx * theta[j]
        if u > lam2:
            t_new = (u - lam2) / (wxx + 2.0 * lam1)
        elif u < -lam2:
            t_new = (u + lam2) / (wxx + 2.0 * lam1)
        else:
            t_new = 0.0
        delta = t_new - theta[j]
        if delta != 0.0:
            for i in range(n):
                r[i] -= delta * xj[i]
            theta[j] = t_new
            if fabs(delta) > max_delta:
                max_delta = fabs(delta)
    return max_delta


def enet_cd_logistic(double[:, ::1] logx, cnp.int64_t[::1] pa, cnp.int64_t[::1] pb,
                     double[::1] mean, double[::1] scale, double[::1] y,
                     double lam1, double lam2, double[::1] theta, double intercept,
                     int max_outer=100, int max_sweeps=2000, double tol=1e-7,
                     double w_min=1e-5):
    """Elastic-net logistic coordinate descent on lazily built columns.

    Same contract as the numpy backend: IRLS majorization, full sweeps
    alternating with active-set sweeps, ``theta`` updated in place.
    """
    cdef Py_ssize_t n = logx.shape[0], q = pa.shape[0]
    eta_arr = np.empty(n)
    r_arr = np.empty(n)
    w_arr = np.empty(n)
    z_arr = np.empty(n)
    xj_arr = np.empty(n)
    all_idx_arr = np.arange(q, dtype=np.int64)
    active_arr = np.empty(q, dtype=np.int64)
    theta_start_arr = np.empty(q)

    cdef double[::1] eta = eta_arr
    cdef double[::1] r = r_arr
    cdef double[::1] w = w_arr
    cdef double[::1] z = z_arr
    cdef double[::1] xj = xj_arr
    cdef cnp.int64_t[::1] all_idx = all_idx_arr
    cdef cnp.int64_t[::1] active = active_arr
    cdef double[::1] theta_start = theta_start_arr

    cdef Py_ssize_t i, j, n_active
    cdef double p_i, w_i
    for i in range(n):
        eta[i] = intercept
    for j in range(q):
        if theta[j] != 0.0:
            _fill_col(logx, pa[j], pb[j], mean[j], scale[j], xj, n)
            for i in range(n):
                eta[i] += theta[j] * xj[i]

    cdef int n_sweeps = 0, outer
    cdef bint converged = False
    cdef double full_delta, act_delta, round_delta, b0_start

    for outer in range(max_outer):
        for i in range(n):
            p_i = 1.0 / (1.0 + exp(-eta[i]))
            w_i = p_i * (1.0 - p_i)
            if w_i < w_min:
                w_i = w_min
            w[i] = w_i
            r[i] = (y[i] - p_i) / w_i
            z[i] = eta[i] + r[i]

        for j in range(q):
            theta_start[j] = theta[j]
        b0_start = intercept

        while True:
            full_delta = _cd_sweep(logx, pa, pb, mean, scale, theta, &intercept,
                                   w, r, xj, lam1, lam2, all_idx, q, n)
            n_sweeps += 1
            if full_delta <= tol or n_sweeps >= max_sweeps:
                break
            while n_sweeps < max_sweeps:
                n_active = 0
                for j in range(q):
                    if theta[j] != 0.0:
                        active[n_active] = j
                        n_active += 1
                act_delta = _cd_sweep(logx, pa, pb, mean, scale, theta, &intercept,
                                      w, r, xj, lam1, lam2, active, n_active, n)
                n_sweeps += 1
                if act_delta <= tol:
                    break

        for i in range(n):
            eta[i] = z[i] - r[i]
        round_delta = fabs(intercept - b0_start)
        for j in range(q):
            if fabs(theta[j] - theta_start[j]) > round_delta:
                round_delta = fabs(theta[j] - theta_start[j])
        if round_delta <= tol:
            converged = True
            break
        if n_sweeps >= max_sweeps:
            break

    return float(intercept), int(n_sweeps), bool(converged)
