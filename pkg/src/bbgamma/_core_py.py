"""Pure numpy implementation of the compiled kernels in ``_core.pyx``.

Used when the extension is not built, for sparse designs, and as the
reference the compiled path is tested against.
"""

import numpy as np

LOG_SQRT_2PI = 0.9189385332046727


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v) if v > 0 else -np.inf


def _bb_parts(m, y, a, b, gamma):
    t = gamma * m
    lsp = -np.logaddexp(0.0, -t)
    lsm = -np.logaddexp(0.0, t)
    pos = np.logaddexp(_log(a), _log(a + b) + t) + lsm
    neg = np.logaddexp(_log(1.0 - a - b), _log(1.0 - a) - t) + lsp
    return t, lsp, lsm, np.where(y > 0.5, pos, neg)


def loss_values(m, y, kind, a, b, gamma):
    m = np.asarray(m, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == 0:
        return _bb_parts(m, y, a, b, gamma)[3]
    if kind == 1:
        z = np.where(y > 0.5, 1.0, -1.0) * gamma * m
        # -sigmoid(-z)
        return -np.exp(-np.logaddexp(0.0, z))
    return y * m - np.logaddexp(0.0, m)


def loss_value_grad(m, y, kind, a, b, gamma):
    m = np.asarray(m, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == 0:
        _, lsp, lsm, lmu = _bb_parts(m, y, a, b, gamma)
        sign = np.where(y > 0.5, 1.0, -1.0)
        g = sign * gamma * np.exp(_log(b) + lsp + lsm - lmu)
        return float(lmu.sum()), g
    if kind == 1:
        sign = np.where(y > 0.5, 1.0, -1.0)
        z = sign * gamma * m
        val = -np.exp(-np.logaddexp(0.0, z))
        g = sign * gamma * np.exp(-np.logaddexp(0.0, z) - np.logaddexp(0.0, -z))
        return float(val.sum()), g
    val = y * m - np.logaddexp(0.0, m)
    g = y - np.exp(-np.logaddexp(0.0, -m))
    return float(val.sum()), g


def _mixture_logs(c, params):
    pi_g, sigma_g, pi_l, b_l = params
    lg = _log(pi_g) - LOG_SQRT_2PI - np.log(sigma_g) - 0.5 * c * c / sigma_g**2
    ll = _log(pi_l) - np.log(2.0 * b_l) - np.abs(c) / b_l
    return lg, ll


def prior_values(c, pkind, params):
    c = np.asarray(c, dtype=float)
    if pkind == 0:
        return -0.5 * params[0] * c * c
    lg, ll = _mixture_logs(c, params)
    return np.logaddexp(lg, ll)


def prior_value(c, pkind, params):
    return float(prior_values(c, pkind, params).sum())


def prior_grad(c, pkind, params):
    c = np.asarray(c, dtype=float)
    if pkind == 0:
        return -params[0] * c
    sigma_g, b_l = params[1], params[3]
    lg, ll = _mixture_logs(c, params)
    lz = np.logaddexp(lg, ll)
    return -np.exp(lg - lz) * c / sigma_g**2 - np.exp(ll - lz) * np.sign(c) / b_l


def objective_value_grad(X, y, coef, kind, a, b, gamma, pkind, params):
    m = X @ coef
    val, gm = loss_value_grad(m, y, kind, a, b, gamma)
    grad = np.asarray(X.T @ gm).ravel() + prior_grad(coef, pkind, params)
    return val + prior_value(coef, pkind, params), grad


def gradient_ascent(X, y, coef, kind, a, b, gamma, pkind, params,
                    rate_max, rate_min, rate_factor, eps_l, eps_g, max_iter):
    f, grad = objective_value_grad(X, y, coef, kind, a, b, gamma, pkind, params)
    if not np.isfinite(f):
        raise FloatingPointError("non-finite objective at start")
    rate = rate_max
    it = accepted = 0
    gmax = np.max(np.abs(grad)) if grad.size else 0.0
    while gmax >= eps_g and rate >= rate_min and it < max_iter:
        it += 1
        cand = coef + rate * grad
        fc, cgrad = objective_value_grad(X, y, cand, kind, a, b, gamma, pkind, params)
        if fc > f:
            accepted += 1
            coef[:] = cand
            grad = cgrad
            gmax = np.max(np.abs(grad))
            improvement = fc - f
            f = fc
            if improvement < eps_l:
                break
        else:
            rate *= rate_factor
    return f, it, accepted


def probe_pass(XT, m, y, coef, kind, a, b, gamma, pkind, params, steps, eps_l):
    steps = np.asarray(steps, dtype=float)
    for i in range(XT.shape[0]):
        col = XT[i]
        if hasattr(col, "toarray"):
            col = col.toarray().ravel()
        rows = np.flatnonzero(col)
        c = coef[i]
        prior_delta = (prior_values(c + steps, pkind, params)
                       - prior_values(np.array([c]), pkind, params))
        if rows.size:
            mr, yr, xr = m[rows], y[rows], col[rows]
            base = loss_values(mr, yr, kind, a, b, gamma)
            shifted = mr[None, :] + steps[:, None] * xr[None, :]
            vals = loss_values(shifted.ravel(), np.tile(yr, steps.size), kind, a, b, gamma)
            # accumulate in row order to mirror the compiled scan
            delta = prior_delta.copy()
            diffs = vals.reshape(steps.size, rows.size) - base[None, :]
            for j in range(rows.size):
                delta += diffs[:, j]
        else:
            delta = prior_delta
        hits = np.flatnonzero(delta >= eps_l)
        if hits.size:
            k = int(hits[0])
            return i, k, float(delta[k])
    return -1, -1, 0.0


def rbf_gram(A, B, sigma):
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))
