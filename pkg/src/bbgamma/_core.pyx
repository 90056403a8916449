# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for objective evaluation, gradient ascent and probe scans.

Every routine here has a numpy twin in :mod:`bbgamma._core_py` with the same
signature; :mod:`bbgamma._backend` picks one at import.

Loss kinds (per-example log-likelihood contribution, maximised):

0. Beta-Bernoulli: ``y log mu + (1-y) log(1-mu)``, ``mu = a + b sigmoid(gamma m)``
1. Sigmoid: ``-1 / (1 + exp(gamma t m))`` with ``t = 2y - 1``
2. Logistic: ``y m - log(1 + exp(m))``

Prior kinds: 0 is ``-lam/2 c^2`` with ``params = [lam]``; 1 is the log of a
Gauss-Laplace mixture with ``params = [pi_g, sigma_g, pi_l, b_l]``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs, fmax, sqrt, INFINITY, isfinite

cnp.import_array()

cdef double LOG_SQRT_2PI = 0.9189385332046727


cdef inline double _logaddexp(double x, double y) nogil:
    cdef double hi, lo
    if x == -INFINITY:
        return y
    if y == -INFINITY:
        return x
    if x > y:
        hi = x
        lo = y
    else:
        hi = y
        lo = x
    return hi + log1p(exp(lo - hi))


cdef inline double _safe_log(double v) nogil:
    if v <= 0.0:
        return -INFINITY
    return log(v)


cdef struct LossParams:
    int kind
    double gamma
    double b
    double log_a        # log a
    double log_ab       # log(a + b)
    double log_ac       # log(1 - a - b)
    double log_1ma      # log(1 - a)
    double log_b
    double a            # floor of mu
    double ab           # ceiling of mu
    double c            # floor of 1 - mu, 1 - a - b
    double c1           # ceiling of 1 - mu, 1 - a


cdef LossParams _make_loss(int kind, double a, double b, double gamma):
    cdef LossParams p
    p.kind = kind
    p.gamma = gamma
    p.b = b
    p.log_a = _safe_log(a)
    p.log_ab = _safe_log(a + b)
    p.log_ac = _safe_log(1.0 - a - b)
    p.log_1ma = _safe_log(1.0 - a)
    p.log_b = _safe_log(b)
    p.a = a
    p.ab = a + b
    p.c = 1.0 - a - b
    p.c1 = 1.0 - a
    return p


cdef double TINY = 1e-290


cdef inline double _log_plateau(double t, double lo, double hi, double log_lo,
                                double log_hi, double* num, double* e) nogil:
    """log(lo + (hi - lo) sigmoid(t)) with one exp and one log on the fast path.

    Stores the scaled numerator and exp(-|t|) for gradient reuse; falls back
    to log-sum-exp when the numerator underflows (zero floor, huge |t|).
    """
    e[0] = exp(-fabs(t))
    if t >= 0:
        num[0] = lo * e[0] + hi
    else:
        num[0] = lo + hi * e[0]
    if num[0] > TINY:
        return log(num[0] / (1.0 + e[0]))
    num[0] = 0.0
    return _logaddexp(log_lo, log_hi + t) - (fmax(t, 0.0) + log1p(e[0]))


cdef inline double _loss_value(double m, double y, LossParams* p) nogil:
    cdef double t, z, num, e
    if p.kind == 0:
        t = p.gamma * m
        if y > 0.5:
            return _log_plateau(t, p.a, p.ab, p.log_a, p.log_ab, &num, &e)
        return _log_plateau(-t, p.c, p.c1, p.log_ac, p.log_1ma, &num, &e)
    elif p.kind == 1:
        z = p.gamma * m
        if y < 0.5:
            z = -z
        if z >= 0:
            t = exp(-z)
            return -t / (1.0 + t)
        return -1.0 / (1.0 + exp(z))
    else:
        return y * m - _logaddexp(0.0, m)


cdef inline double _loss_value_grad(double m, double y, LossParams* p, double* g) nogil:
    """Return the per-example value and store d/dm in ``g``."""
    cdef double t, z, lsp, lsm, lmu, val, e, s, num
    if p.kind == 0:
        t = p.gamma * m
        if y > 0.5:
            lmu = _log_plateau(t, p.a, p.ab, p.log_a, p.log_ab, &num, &e)
            s = 1.0
        else:
            lmu = _log_plateau(-t, p.c, p.c1, p.log_ac, p.log_1ma, &num, &e)
            s = -1.0
        if num > 0.0:
            # b sigmoid(t) sigmoid(-t) / mu with sigmoid products from exp(-|t|)
            g[0] = s * p.gamma * p.b * e / ((1.0 + e) * num)
        else:
            lsp = -(fmax(-t, 0.0) + log1p(e))
            lsm = -(fmax(t, 0.0) + log1p(e))
            g[0] = s * p.gamma * exp(p.log_b + lsp + lsm - lmu)
        return lmu
    elif p.kind == 1:
        z = p.gamma * m
        s = 1.0
        if y < 0.5:
            z = -z
            s = -1.0
        # value = -sigmoid(-z); d/dz = sigmoid(z) sigmoid(-z)
        if z >= 0:
            e = exp(-z)
            val = -e / (1.0 + e)
            g[0] = s * p.gamma * e / ((1.0 + e) * (1.0 + e))
        else:
            e = exp(z)
            val = -1.0 / (1.0 + e)
            g[0] = s * p.gamma * e / ((1.0 + e) * (1.0 + e))
        return val
    else:
        if m >= 0:
            e = exp(-m)
            g[0] = y - 1.0 / (1.0 + e)
        else:
            e = exp(m)
            g[0] = y - e / (1.0 + e)
        return y * m - _logaddexp(0.0, m)


cdef inline double _prior_value(double c, int pkind, double* pp) nogil:
    cdef double lg, ll
    if pkind == 0:
        return -0.5 * pp[0] * c * c
    lg = _safe_log(pp[0]) - LOG_SQRT_2PI - log(pp[1]) - 0.5 * c * c / (pp[1] * pp[1])
    ll = _safe_log(pp[2]) - log(2.0 * pp[3]) - fabs(c) / pp[3]
    return _logaddexp(lg, ll)


cdef inline double _prior_grad(double c, int pkind, double* pp) nogil:
    cdef double lg, ll, lz, sgn
    if pkind == 0:
        return -pp[0] * c
    if c == 0.0:
        return 0.0
    lg = _safe_log(pp[0]) - LOG_SQRT_2PI - log(pp[1]) - 0.5 * c * c / (pp[1] * pp[1])
    ll = _safe_log(pp[2]) - log(2.0 * pp[3]) - fabs(c) / pp[3]
    lz = _logaddexp(lg, ll)
    sgn = 1.0 if c > 0 else -1.0
    return -exp(lg - lz) * c / (pp[1] * pp[1]) - exp(ll - lz) * sgn / pp[3]


def loss_values(double[::1] m, double[::1] y, int kind, double a, double b, double gamma):
    """Per-example log-likelihood contributions."""
    cdef Py_ssize_t i, n = m.shape[0]
    cdef LossParams p = _make_loss(kind, a, b, gamma)
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _loss_value(m[i], y[i], &p)
    return out


def loss_value_grad(double[::1] m, double[::1] y, int kind, double a, double b, double gamma):
    """Summed log-likelihood and its gradient with respect to the scores."""
    cdef Py_ssize_t i, n = m.shape[0]
    cdef LossParams p = _make_loss(kind, a, b, gamma)
    cdef double total = 0.0
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        total += _loss_value_grad(m[i], y[i], &p, &o[i])
    return total, out


def prior_value(double[::1] c, int pkind, double[::1] params):
    cdef Py_ssize_t j
    cdef double total = 0.0
    for j in range(c.shape[0]):
        total += _prior_value(c[j], pkind, &params[0])
    return total


def prior_grad(double[::1] c, int pkind, double[::1] params):
    out = np.empty(c.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t j
    for j in range(c.shape[0]):
        o[j] = _prior_grad(c[j], pkind, &params[0])
    return out


cdef double _objective(const double[:, ::1] X, double[::1] y, double[::1] coef,
                       LossParams* lp, int pkind, double* pp,
                       double[::1] m, double[::1] gm, double[::1] grad) nogil:
    """Fill scores ``m``, score-gradient ``gm`` and coefficient gradient ``grad``."""
    cdef Py_ssize_t i, j, n = X.shape[0], d = X.shape[1]
    cdef double acc, total = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc = acc + X[i, j] * coef[j]
        m[i] = acc
        total = total + _loss_value_grad(acc, y[i], lp, &gm[i])
    for j in range(d):
        total = total + _prior_value(coef[j], pkind, pp)
        grad[j] = _prior_grad(coef[j], pkind, pp)
    for i in range(n):
        acc = gm[i]
        if acc != 0.0:
            for j in range(d):
                grad[j] = grad[j] + X[i, j] * acc
    return total


def objective_value_grad(const double[:, ::1] X, double[::1] y, double[::1] coef,
                         int kind, double a, double b, double gamma,
                         int pkind, double[::1] params):
    """Penalised log-likelihood and its gradient for a dense design."""
    cdef LossParams lp = _make_loss(kind, a, b, gamma)
    n, d = X.shape[0], X.shape[1]
    m = np.empty(n)
    gm = np.empty(n)
    grad = np.empty(d)
    val = _objective(X, y, coef, &lp, pkind, &params[0], m, gm, grad)
    return val, grad


def gradient_ascent(const double[:, ::1] X, double[::1] y, double[::1] coef,
                    int kind, double a, double b, double gamma,
                    int pkind, double[::1] params,
                    double rate_max, double rate_min, double rate_factor,
                    double eps_l, double eps_g, long max_iter):
    """Fixed-step ascent with multiplicative rate reduction; updates ``coef`` in place.

    Returns ``(value, n_iter, n_accepted)``.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], j
    cdef LossParams lp = _make_loss(kind, a, b, gamma)
    cdef double* pp = &params[0]
    cdef double[::1] m = np.empty(n)
    cdef double[::1] gm = np.empty(n)
    cdef double[::1] grad = np.empty(d)
    cdef double[::1] cand = np.empty(d)
    cdef double[::1] cgrad = np.empty(d)
    cdef double f, fc, gmax, rate = rate_max
    cdef long it = 0, accepted = 0
    f = _objective(X, y, coef, &lp, pkind, pp, m, gm, grad)
    if not isfinite(f):
        raise FloatingPointError("non-finite objective at start")
    with nogil:
        gmax = 0.0
        for j in range(d):
            if fabs(grad[j]) > gmax:
                gmax = fabs(grad[j])
        while gmax >= eps_g and rate >= rate_min and it < max_iter:
            it += 1
            for j in range(d):
                cand[j] = coef[j] + rate * grad[j]
            fc = _objective(X, y, cand, &lp, pkind, pp, m, gm, cgrad)
            if fc > f:
                accepted += 1
                for j in range(d):
                    coef[j] = cand[j]
                    grad[j] = cgrad[j]
                gmax = 0.0
                for j in range(d):
                    if fabs(grad[j]) > gmax:
                        gmax = fabs(grad[j])
                if fc - f < eps_l:
                    f = fc
                    break
                f = fc
            else:
                rate = rate * rate_factor
    return f, it, accepted


def probe_pass(const double[:, ::1] XT, double[::1] m, double[::1] y, double[::1] coef,
               int kind, double a, double b, double gamma,
               int pkind, double[::1] params, double[::1] steps, double eps_l):
    """Scan coordinates in order and return the first improving probe.

    ``XT`` holds the design's columns as rows and ``m`` the current scores.
    Returns ``(coordinate, step_index, improvement)`` or ``(-1, -1, 0.0)``.
    """
    cdef Py_ssize_t d = XT.shape[0], n = XT.shape[1], i, j, k, nnz
    cdef Py_ssize_t ns = steps.shape[0]
    cdef LossParams lp = _make_loss(kind, a, b, gamma)
    cdef double* pp = &params[0]
    cdef cnp.npy_intp[::1] rows = np.empty(n, dtype=np.intp)
    cdef double[::1] base = np.empty(n)
    cdef double delta = 0.0, c, s, p0
    cdef Py_ssize_t hit_i = -1, hit_k = -1
    with nogil:
        for i in range(d):
            nnz = 0
            for j in range(n):
                if XT[i, j] != 0.0:
                    rows[nnz] = j
                    base[nnz] = _loss_value(m[j], y[j], &lp)
                    nnz += 1
            c = coef[i]
            p0 = _prior_value(c, pkind, pp)
            for k in range(ns):
                s = steps[k]
                delta = _prior_value(c + s, pkind, pp) - p0
                for j in range(nnz):
                    delta = delta + _loss_value(m[rows[j]] + s * XT[i, rows[j]], y[rows[j]], &lp) - base[j]
                if delta >= eps_l:
                    hit_k = k
                    break
            if hit_k >= 0:
                hit_i = i
                break
    if hit_i < 0:
        return -1, -1, 0.0
    return hit_i, hit_k, delta


def rbf_gram(const double[:, ::1] A, const double[:, ::1] B, double sigma):
    """``exp(-||a - b||^2 / (2 sigma^2))`` for every row pair."""
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], d = A.shape[1], i, j, k
    cdef double acc, diff, scale = -0.5 / (sigma * sigma)
    out = np.empty((na, nb))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(na):
            for j in range(nb):
                acc = 0.0
                for k in range(d):
                    diff = A[i, k] - B[j, k]
                    acc = acc + diff * diff
                o[i, j] = exp(scale * acc)
    return out
