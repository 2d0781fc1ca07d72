# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference versions."""
from libc.math cimport exp, log, pow, fabs

CONVERGED = 0
BELOW_MIN = 1
ABOVE_MAX = 2
MAX_ITER = 3


cdef double _rate_sum(double lam, const double[:] alpha, const double[:] beta,
                      const double[:] gamma, const double[:] omega,
                      double min_rate) noexcept nogil:
    cdef Py_ssize_t i
    cdef double total = 0.0, r
    for i in range(alpha.shape[0]):
        r = pow(lam * omega[i] / alpha[i], 1.0 / beta[i]) - gamma[i]
        total += r if r > min_rate else min_rate
    return total


def rate_sum(double lam, const double[:] alpha, const double[:] beta,
             const double[:] gamma, const double[:] omega, double min_rate):
    return _rate_sum(lam, alpha, beta, gamma, omega, min_rate)


def central_lambda(const double[:] alpha, const double[:] beta,
                   const double[:] gamma, const double[:] omega,
                   double target, double min_rate,
                   double lo=1e-4, double hi=1e6, int max_iter=100):
    cdef double tol = max(1e-6, 1e-4 * fabs(target))
    cdef double total_hi = _rate_sum(hi, alpha, beta, gamma, omega, min_rate)
    cdef double total_lo, log_lo, log_hi, mid, lam, total
    cdef double best_lam, best_total
    cdef int it
    if total_hi >= target:
        return hi, total_hi, (CONVERGED if total_hi - target <= tol else BELOW_MIN)
    total_lo = _rate_sum(lo, alpha, beta, gamma, omega, min_rate)
    if total_lo <= target:
        return lo, total_lo, (CONVERGED if target - total_lo <= tol else ABOVE_MAX)
    log_lo = log(lo)
    log_hi = log(hi)
    best_lam = hi
    best_total = total_hi
    for it in range(max_iter):
        mid = 0.5 * (log_lo + log_hi)
        lam = exp(mid)
        total = _rate_sum(lam, alpha, beta, gamma, omega, min_rate)
        if fabs(total - target) < fabs(best_total - target):
            best_lam = lam
            best_total = total
        if fabs(total - target) <= tol:
            return lam, total, CONVERGED
        if total > target:
            log_lo = mid
        else:
            log_hi = mid
    return best_lam, best_total, MAX_ITER


def sse_classic(const double[:] log_params, const double[:] bpp,
                const double[:] mse):
    cdef double c = exp(log_params[0]), k = exp(log_params[1])
    cdef double s = 0.0, e
    cdef Py_ssize_t i
    for i in range(bpp.shape[0]):
        e = c * pow(bpp[i], -k) - mse[i]
        s += e * e
    return s


def sse_proposed(const double[:] log_params, const double[:] bpp,
                 const double[:] mse):
    cdef double c = exp(log_params[0]), k = exp(log_params[1])
    cdef double b = exp(log_params[2]), t = exp(log_params[3])
    cdef double s = 0.0, e
    cdef Py_ssize_t i
    for i in range(bpp.shape[0]):
        e = c * pow(bpp[i] + b, -k) - t - mse[i]
        s += e * e
    return s
