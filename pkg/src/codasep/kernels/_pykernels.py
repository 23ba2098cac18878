"""Pure-numpy implementations of the hot kernels.

These mirror the compiled extension (``_ckernels``) function for function
and are the fallback selected at import when the extension is missing.
Callers are responsible for validation; kernels expect contiguous float64
and int64/uint8 arrays.
"""

from __future__ import annotations

import numpy as np

_ONE_MINUS = np.nextafter(1.0, 0.0)
_P_FLOOR = 1e-300


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged; exact half-integers."""
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    sx = x[order]
    boundary = np.empty(n + 1, dtype=bool)
    boundary[0] = True
    boundary[n] = True
    boundary[1:n] = sx[1:] != sx[:-1]
    edges = np.flatnonzero(boundary)
    starts, ends = edges[:-1], edges[1:]
    mid = 0.5 * (starts + 1 + ends)
    out = np.empty(n)
    out[order] = np.repeat(mid, ends - starts)
    return out


def mannwhitney_auc(scores: np.ndarray, pos: np.ndarray) -> float:
    """AUC with half credit for ties, via the rank-sum identity."""
    n1 = int(pos.sum())
    n0 = scores.shape[0] - n1
    ranks = _midranks(scores)
    rank_sum = ranks[pos.astype(bool)].sum()
    return float((rank_sum - 0.5 * n1 * (n1 + 1)) / (n1 * n0))


def delong_auc_variance(scores: np.ndarray, pos: np.ndarray) -> tuple[float, float]:
    """AUC and its DeLong variance from placement components V_i, W_j."""
    mask = pos.astype(bool)
    spos = scores[mask]
    sneg = scores[~mask]
    n1 = spos.shape[0]
    n0 = sneg.shape[0]
    r_all = _midranks(np.concatenate([spos, sneg]))
    r_pos = _midranks(spos)
    r_neg = _midranks(sneg)
    auc = float((r_all[:n1].sum() - 0.5 * n1 * (n1 + 1)) / (n1 * n0))
    v = (r_all[:n1] - r_pos) / n0
    w = 1.0 - (r_all[n1:] - r_neg) / n1
    var = float(
        np.square(v - auc).sum() / (n1 * (n1 - 1))
        + np.square(w - auc).sum() / (n0 * (n0 - 1))
    )
    return auc, var


def _softmax_probs(x: np.ndarray, beta: np.ndarray, n_classes: int) -> np.ndarray:
    n = x.shape[0]
    eta = np.zeros((n, n_classes))
    eta[:, :-1] = x @ beta.T
    eta -= eta.max(axis=1, keepdims=True)
    p = np.exp(eta)
    p /= p.sum(axis=1, keepdims=True)
    # keep every entry inside the open interval (0, 1)
    np.clip(p, _P_FLOOR, _ONE_MINUS, out=p)
    return p


def _loglik(probs: np.ndarray, y: np.ndarray) -> float:
    return float(np.log(probs[np.arange(y.shape[0]), y]).sum())


def multinomial_newton(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_iter: int = 100,
    tol: float = 1e-8,
    grad_tol: float = 1e-6,
    sep_threshold: float = 30.0,
    ridge: float = 1e-8,
):
    """Newton-Raphson for the baseline-category multinomial logit.

    ``x`` is the full design including the intercept column; ``y`` holds
    0-based class indices with the baseline last (index n_classes - 1).
    Returns ``(beta, probs, loglik, iterations, converged, separation,
    jittered)`` where ``beta`` is (n_classes - 1, d). Steps are halved
    (up to 20 times) whenever they would decrease the log-likelihood,
    quasi-complete separation stops the fit once any |coefficient|
    exceeds ``sep_threshold``, and a singular Hessian gets ``ridge``
    added to its diagonal.
    """
    n, d = x.shape
    k = n_classes - 1
    kd = k * d
    beta = np.zeros((k, d))
    indicators = (y[:, None] == np.arange(k)[None, :]).astype(np.float64)
    probs = _softmax_probs(x, beta, n_classes)
    ll = _loglik(probs, y)
    iterations = 0
    converged = False
    separation = False
    jittered = False
    rel_change = np.inf

    while True:
        grad = x.T @ (indicators - probs[:, :k])  # (d, k)
        gmax = float(np.abs(grad).max())
        if rel_change <= tol and gmax <= grad_tol:
            converged = True
            break
        if iterations >= max_iter:
            break

        hess = np.empty((kd, kd))
        for c in range(k):
            for c2 in range(c, k):
                w = probs[:, c] * ((1.0 if c == c2 else 0.0) - probs[:, c2])
                block = x.T @ (x * w[:, None])
                hess[c * d : (c + 1) * d, c2 * d : (c2 + 1) * d] = block
                if c2 != c:
                    hess[c2 * d : (c2 + 1) * d, c * d : (c + 1) * d] = block
        g = grad.T.reshape(kd)
        step = None
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = None
        if step is None or not np.all(np.isfinite(step)):
            jittered = True
            hess[np.diag_indices(kd)] += ridge
            try:
                step = np.linalg.solve(hess, g)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
        step = step.reshape(k, d)

        scale = 1.0
        improved = False
        for _ in range(21):
            candidate = beta + scale * step
            probs_new = _softmax_probs(x, candidate, n_classes)
            ll_new = _loglik(probs_new, y)
            if ll_new >= ll:
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
        beta = candidate
        probs = probs_new
        rel_change = abs(ll_new - ll) / (abs(ll_new) + 1e-12)
        ll = ll_new
        iterations += 1
        if float(np.abs(beta).max()) > sep_threshold:
            separation = True
            break

    return beta, probs, ll, iterations, converged, separation, jittered


def _design_column(logx, pa, pb, mean, scale, j, out):
    np.subtract(logx[:, pa[j]], logx[:, pb[j]], out=out)
    out -= mean[j]
    out /= scale[j]


def enet_cd_logistic(
    logx: np.ndarray,
    pa: np.ndarray,
    pb: np.ndarray,
    mean: np.ndarray,
    scale: np.ndarray,
    y: np.ndarray,
    lam1: float,
    lam2: float,
    theta: np.ndarray,
    intercept: float,
    max_outer: int = 100,
    max_sweeps: int = 2000,
    tol: float = 1e-7,
    w_min: float = 1e-5,
):
    """Elastic-net logistic coordinate descent on the pairwise log-ratio design.

    The design is never materialized: column j of the standardized design
    is ``(logx[:, pa[j]] - logx[:, pb[j]] - mean[j]) / scale[j]``, built
    on demand (columns with ``scale[j] <= 0`` are excluded). Minimizes

        (1/n) sum_i log-loss(eta_i) + lam1 * ||theta||_2^2 + lam2 * ||theta||_1

    by IRLS majorization with cyclic coordinate descent and active-set
    sweeps. ``theta`` (standardized scale) is updated in place for warm
    starts; the intercept is unpenalized. Returns ``(intercept, n_sweeps,
    converged)``.
    """
    n, q = logx.shape[0], pa.shape[0]
    xj = np.empty(n)
    eta = np.full(n, intercept)
    for j in np.flatnonzero(theta):
        _design_column(logx, pa, pb, mean, scale, j, xj)
        eta += theta[j] * xj

    w = np.empty(n)
    r = np.empty(n)
    n_sweeps = 0
    converged = False

    def sweep(indices) -> float:
        nonlocal intercept, n_sweeps
        max_delta = 0.0
        # unpenalized intercept refresh
        db = float((w * r).sum() / w.sum())
        intercept += db
        np.subtract(r, db, out=r)
        max_delta = abs(db)
        for j in indices:
            if scale[j] <= 0.0:
                continue
            _design_column(logx, pa, pb, mean, scale, j, xj)
            wx = w * xj
            wxx = float(wx @ xj) / n
            u = float(wx @ r) / n + wxx * theta[j]
            if u > lam2:
                t_new = (u - lam2) / (wxx + 2.0 * lam1)
            elif u < -lam2:
                t_new = (u + lam2) / (wxx + 2.0 * lam1)
            else:
                t_new = 0.0
            delta = t_new - theta[j]
            if delta != 0.0:
                np.subtract(r, delta * xj, out=r)
                theta[j] = t_new
                max_delta = max(max_delta, abs(delta))
        n_sweeps += 1
        return max_delta

    for _ in range(max_outer):
        with np.errstate(over="ignore"):
            p = 1.0 / (1.0 + np.exp(-eta))
        np.multiply(p, 1.0 - p, out=w)
        np.maximum(w, w_min, out=w)
        np.divide(y - p, w, out=r)
        z = eta + r  # working response, fixed for this majorization

        theta_start = theta.copy()
        intercept_start = intercept
        while True:
            full_delta = sweep(range(q))
            if full_delta <= tol or n_sweeps >= max_sweeps:
                break
            while n_sweeps < max_sweeps:
                active = np.flatnonzero(theta)
                if sweep(active) <= tol:
                    break
        eta = z - r

        round_delta = abs(intercept - intercept_start)
        if theta.size:
            round_delta = max(round_delta, float(np.abs(theta - theta_start).max()))
        if round_delta <= tol:
            converged = True
            break
        if n_sweeps >= max_sweeps:
            break

    return float(intercept), n_sweeps, converged
