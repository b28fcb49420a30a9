# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-match likelihood kernels (see _pykernels for the reference)."""
import numpy as np

from libc.math cimport exp, log, INFINITY
from scipy.special.cython_special cimport gammaln, pdtr, pdtrc

cdef double LOGIT_EPS = 1e-10
cdef double LOGIT_CAP = log((1.0 - 1e-10) / 1e-10)
cdef double LOG2 = log(2.0)


cdef inline void _cdf_sf(double h, double rate, double *F, double *S, double *pmf) noexcept nogil:
    # direct series for the usual small counts and rates, incomplete gamma otherwise
    cdef double term, lo = 0.0, hi = 0.0
    cdef int i, hh
    if h > 60.0 or rate > 30.0:
        F[0] = pdtr(h, rate)
        S[0] = pdtrc(h, rate)
        pmf[0] = exp(h * log(rate) - rate - gammaln(h + 1.0))
        return
    hh = <int>h
    term = exp(-rate)
    for i in range(hh + 1):
        if i > 0:
            term *= rate / i
        lo += term
    pmf[0] = term
    i = hh + 1
    term *= rate / i
    while True:
        hi += term
        if term <= 1e-17 * hi and i > rate:
            break
        i += 1
        term *= rate / i
        if term == 0.0:
            break
    F[0] = lo
    S[0] = hi


cdef inline void _logit_cdf(double h, double rate, double *L, double *dL) noexcept nogil:
    cdef double F, S, pmf
    _cdf_sf(h, rate, &F, &S, &pmf)
    if F < LOGIT_EPS:
        L[0] = -LOGIT_CAP
        dL[0] = 0.0
    elif S < LOGIT_EPS:
        L[0] = LOGIT_CAP
        dL[0] = 0.0
    else:
        L[0] = log(F) - log(S)
        dL[0] = -rate * pmf / (F * S)


cdef inline double _logaddexp(double a, double b) noexcept nogil:
    if a == -INFINITY and b == -INFINITY:
        return -INFINITY
    if a > b:
        return a + log(1.0 + exp(b - a))
    return b + log(1.0 + exp(a - b))


def logit_cdf(h, rate):
    shape = np.broadcast(h, rate).shape
    cdef const double[::1] hv = np.array(np.broadcast_to(h, shape), dtype=float).ravel()
    cdef const double[::1] rv = np.array(np.broadcast_to(rate, shape), dtype=float).ravel()
    cdef Py_ssize_t n = hv.shape[0], k
    out_L = np.empty(n)
    out_d = np.empty(n)
    cdef double[::1] Lv = out_L
    cdef double[::1] dv = out_d
    with nogil:
        for k in range(n):
            _logit_cdf(hv[k], rv[k], &Lv[k], &dv[k])
    return out_L.reshape(shape), out_d.reshape(shape)


def dc_loglik_grad(x, y, loglam, logmu, w, double rho):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=float)
    cdef const double[::1] llv = np.ascontiguousarray(loglam, dtype=float)
    cdef const double[::1] lmv = np.ascontiguousarray(logmu, dtype=float)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef Py_ssize_t n = xv.shape[0], k
    g_l_arr = np.zeros(n)
    g_m_arr = np.zeros(n)
    cdef double[::1] g_l = g_l_arr
    cdef double[::1] g_m = g_m_arr
    cdef double lam, mu, lo, hi, tau, dr, dl, dm, xk, yk, lp
    cdef double ll = 0.0, g_rho = 0.0
    cdef bint feasible = True

    with nogil:
        for k in range(n):
            lam = exp(llv[k])
            mu = exp(lmv[k])
            lo = -1.0 / lam if -1.0 / lam > -1.0 / mu else -1.0 / mu
            hi = 1.0 / (lam * mu) if 1.0 / (lam * mu) < 1.0 else 1.0
            if rho < lo or rho > hi:
                feasible = False
                break
        if feasible:
            for k in range(n):
                xk = xv[k]
                yk = yv[k]
                lam = exp(llv[k])
                mu = exp(lmv[k])
                tau = 1.0
                dr = 0.0
                dl = 0.0
                dm = 0.0
                if xk == 0.0 and yk == 0.0:
                    tau = 1.0 - lam * mu * rho
                    dr = -lam * mu
                    dl = -lam * mu * rho
                    dm = dl
                elif xk == 0.0 and yk == 1.0:
                    tau = 1.0 + lam * rho
                    dr = lam
                    dl = lam * rho
                elif xk == 1.0 and yk == 0.0:
                    tau = 1.0 + mu * rho
                    dr = mu
                    dm = mu * rho
                elif xk == 1.0 and yk == 1.0:
                    tau = 1.0 - rho
                    dr = -1.0
                lp = (xk * llv[k] - lam - gammaln(xk + 1.0)
                      + yk * lmv[k] - mu - gammaln(yk + 1.0))
                if tau <= 0.0:
                    ll = -INFINITY
                else:
                    ll += wv[k] * (log(tau) + lp)
                g_l[k] = wv[k] * ((xk - lam) + dl / tau)
                g_m[k] = wv[k] * ((yk - mu) + dm / tau)
                g_rho += wv[k] * dr / tau
    if not feasible:
        return -np.inf, np.zeros(n), np.zeros(n), 0.0
    return ll, g_l_arr, g_m_arr, g_rho


def marco_loglik_grad(x, y, loglam, logmu, w, double theta1, double theta2, double theta3):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=float)
    cdef const double[::1] llv = np.ascontiguousarray(loglam, dtype=float)
    cdef const double[::1] lmv = np.ascontiguousarray(logmu, dtype=float)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef Py_ssize_t n = xv.shape[0], k
    g_l_arr = np.zeros(n)
    g_m_arr = np.zeros(n)
    cdef double[::1] g_l = g_l_arr
    cdef double[::1] g_m = g_m_arr
    cdef double ll = 0.0, gt1 = 0.0, gt2 = 0.0, gt3 = 0.0
    cdef double xk, yk, lam, mu, lY, dLY, lX, dLX, lpy, lpx, psy, psx
    cdef double gx, gy, lA, lB, lse, wA, wB, dA, dB

    with nogil:
        for k in range(n):
            xk = xv[k]
            yk = yv[k]
            lam = exp(llv[k])
            mu = exp(lmv[k])
            _logit_cdf(xk, mu, &lY, &dLY)
            _logit_cdf(yk, lam, &lX, &dLX)
            lpy = theta1 + theta2 * lmv[k] + theta3 * lY
            lpx = theta1 + theta2 * llv[k] + theta3 * lX
            psy = exp(lpy)
            psx = exp(lpx)
            gx = gammaln(xk + 1.0)
            gy = gammaln(yk + 1.0)
            lA = yk * lpy - psy - gy + xk * llv[k] - lam - gx
            lB = xk * lpx - psx - gx + yk * lmv[k] - mu - gy
            lse = _logaddexp(lA, lB)
            ll += wv[k] * (lse - LOG2)
            wA = exp(lA - lse)
            wB = exp(lB - lse)
            dA = yk - psy
            dB = xk - psx
            g_l[k] = wv[k] * (wA * (xk - lam) + wB * dB * (theta2 + theta3 * dLX))
            g_m[k] = wv[k] * (wA * dA * (theta2 + theta3 * dLY) + wB * (yk - mu))
            gt1 += wv[k] * (wA * dA + wB * dB)
            gt2 += wv[k] * (wA * dA * lmv[k] + wB * dB * llv[k])
            gt3 += wv[k] * (wA * dA * lY + wB * dB * lX)
    return ll, g_l_arr, g_m_arr, np.array([gt1, gt2, gt3])
