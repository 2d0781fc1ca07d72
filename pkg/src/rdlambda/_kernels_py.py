"""Pure-Python versions of the hot kernels.

Same signatures and results as the compiled ``_kernels`` extension; used when
the extension is not built or ``RDLAMBDA_PURE_PYTHON`` is set.
"""
import math

CONVERGED = 0
BELOW_MIN = 1  # target below the floor of all frames: every frame at min_rate
ABOVE_MAX = 2  # target above what the lower lambda bound produces
MAX_ITER = 3


def rate_sum(lam, alpha, beta, gamma, omega, min_rate):
    total = 0.0
    for a, b, g, w in zip(alpha, beta, gamma, omega):
        r = (lam * w / a) ** (1.0 / b) - g
        total += r if r > min_rate else min_rate
    return total


def central_lambda(alpha, beta, gamma, omega, target, min_rate,
                   lo=1e-4, hi=1e6, max_iter=100):
    """Bisect log(lambda) so that ``rate_sum`` hits ``target``.

    Returns ``(lam, total, status)``.
    """
    tol = max(1e-6, 1e-4 * abs(target))
    total_hi = rate_sum(hi, alpha, beta, gamma, omega, min_rate)
    if total_hi >= target:
        return hi, total_hi, (CONVERGED if total_hi - target <= tol else BELOW_MIN)
    total_lo = rate_sum(lo, alpha, beta, gamma, omega, min_rate)
    if total_lo <= target:
        return lo, total_lo, (CONVERGED if target - total_lo <= tol else ABOVE_MAX)
    log_lo = math.log(lo)
    log_hi = math.log(hi)
    best_lam, best_total = hi, total_hi
    for _ in range(max_iter):
        mid = 0.5 * (log_lo + log_hi)
        lam = math.exp(mid)
        total = rate_sum(lam, alpha, beta, gamma, omega, min_rate)
        if abs(total - target) < abs(best_total - target):
            best_lam, best_total = lam, total
        if abs(total - target) <= tol:
            return lam, total, CONVERGED
        if total > target:
            log_lo = mid
        else:
            log_hi = mid
    return best_lam, best_total, MAX_ITER


def sse_classic(log_params, bpp, mse):
    c = math.exp(log_params[0])
    k = math.exp(log_params[1])
    s = 0.0
    for r, d in zip(bpp, mse):
        e = c * r ** (-k) - d
        s += e * e
    return s


def sse_proposed(log_params, bpp, mse):
    c = math.exp(log_params[0])
    k = math.exp(log_params[1])
    b = math.exp(log_params[2])
    t = math.exp(log_params[3])
    s = 0.0
    for r, d in zip(bpp, mse):
        e = c * (r + b) ** (-k) - t - d
        s += e * e
    return s
