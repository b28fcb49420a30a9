"""Pure numpy per-match likelihood kernels.

Fallback for :mod:`scoreline._ckernels`; both modules expose the same
functions with the same argument order and must agree to rounding error.
All inputs are 1-d arrays over matches with strictly positive weights.
"""
import numpy as np
from scipy.special import gammaln, pdtr, pdtrc

LOGIT_EPS = 1e-10
_LOGIT_CAP = float(np.log((1.0 - LOGIT_EPS) / LOGIT_EPS))


def logit_cdf(h, rate):
    """logit of the Poisson(rate) CDF at h, clamped to [eps, 1-eps].

    Returns the value and its derivative with respect to log(rate); the
    derivative is zero where the clamp is active.
    """
    h = np.asarray(h, dtype=float)
    rate = np.asarray(rate, dtype=float)
    F = pdtr(h, rate)
    S = pdtrc(h, rate)
    low = F < LOGIT_EPS
    high = S < LOGIT_EPS
    inner = ~(low | high)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.where(inner, np.log(F) - np.log(S), 0.0)
        pmf = np.exp(h * np.log(rate) - rate - gammaln(h + 1.0))
        dL = np.where(inner, -rate * pmf / (F * S), 0.0)
    L = np.where(low, -_LOGIT_CAP, np.where(high, _LOGIT_CAP, L))
    return L, dL


def dc_loglik_grad(x, y, loglam, logmu, w, rho):
    """Weighted Dixon-Coles log-likelihood and its gradient.

    Returns ``(ll, g_loglam, g_logmu, g_rho)``; ``ll`` is ``-inf`` with zero
    gradients when ``rho`` is infeasible for any match.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = np.exp(loglam)
    mu = np.exp(logmu)
    n = x.shape[0]
    lower = np.max(np.maximum(-1.0 / lam, -1.0 / mu), initial=-np.inf)
    upper = np.min(np.minimum(1.0 / (lam * mu), 1.0), initial=np.inf)
    if not (lower <= rho <= upper):
        return -np.inf, np.zeros(n), np.zeros(n), 0.0

    tau = np.ones(n)
    dt_rho = np.zeros(n)
    dt_l = np.zeros(n)
    dt_m = np.zeros(n)
    c00 = (x == 0) & (y == 0)
    c01 = (x == 0) & (y == 1)
    c10 = (x == 1) & (y == 0)
    c11 = (x == 1) & (y == 1)
    lm = lam * mu
    tau[c00] = 1.0 - lm[c00] * rho
    dt_rho[c00] = -lm[c00]
    dt_l[c00] = -lm[c00] * rho
    dt_m[c00] = -lm[c00] * rho
    tau[c01] = 1.0 + lam[c01] * rho
    dt_rho[c01] = lam[c01]
    dt_l[c01] = lam[c01] * rho
    tau[c10] = 1.0 + mu[c10] * rho
    dt_rho[c10] = mu[c10]
    dt_m[c10] = mu[c10] * rho
    tau[c11] = 1.0 - rho
    dt_rho[c11] = -1.0

    with np.errstate(divide="ignore", invalid="ignore"):
        lp = (x * loglam - lam - gammaln(x + 1.0)
              + y * logmu - mu - gammaln(y + 1.0))
        ll = float(np.sum(w * (np.log(tau) + lp)))
        g_l = w * ((x - lam) + dt_l / tau)
        g_m = w * ((y - mu) + dt_m / tau)
        g_rho = float(np.sum(w * dt_rho / tau))
    return ll, g_l, g_m, g_rho


def marco_loglik_grad(x, y, loglam, logmu, w, theta1, theta2, theta3):
    """Weighted Mar-Co mixture log-likelihood and its gradient.

    Returns ``(ll, g_loglam, g_logmu, g_theta)`` with ``g_theta`` of length 3.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = np.exp(loglam)
    mu = np.exp(logmu)
    LY, dLY = logit_cdf(x, mu)
    LX, dLX = logit_cdf(y, lam)
    log_psi_y = theta1 + theta2 * logmu + theta3 * LY
    log_psi_x = theta1 + theta2 * loglam + theta3 * LX
    psi_y = np.exp(log_psi_y)
    psi_x = np.exp(log_psi_x)
    gx = gammaln(x + 1.0)
    gy = gammaln(y + 1.0)
    lA = y * log_psi_y - psi_y - gy + x * loglam - lam - gx
    lB = x * log_psi_x - psi_x - gx + y * logmu - mu - gy
    lse = np.logaddexp(lA, lB)
    ll = float(np.sum(w * (lse - np.log(2.0))))
    wA = np.exp(lA - lse)
    wB = np.exp(lB - lse)
    dA = y - psi_y
    dB = x - psi_x
    g_l = w * (wA * (x - lam) + wB * dB * (theta2 + theta3 * dLX))
    g_m = w * (wA * dA * (theta2 + theta3 * dLY) + wB * (y - mu))
    g_theta = np.array([
        np.sum(w * (wA * dA + wB * dB)),
        np.sum(w * (wA * dA * logmu + wB * dB * loglam)),
        np.sum(w * (wA * dA * LY + wB * dB * LX)),
    ])
    return ll, g_l, g_m, g_theta
