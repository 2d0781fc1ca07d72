"""Rate accuracy, PSNR and Bjontegaard delta rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

PSNR_CAP_DB = 100.0
PEAK = 255.0


@dataclass(frozen=True)
class RdPoint:
    bitrate: float
    psnr_db: float

    def __post_init__(self):
        if not self.bitrate > 0:
            raise ValueError("bitrate must be > 0")


def delta_r(r_out: float, r_target: float) -> float:
    """Absolute rate error in percent of the target."""
    if not r_target > 0:
        raise ValueError("r_target must be > 0")
    return abs(r_out - r_target) / r_target * 100.0


def psnr_from_mse(mse: float, cap: float = PSNR_CAP_DB) -> float:
    if mse < 0:
        raise ValueError("mse must be >= 0")
    if mse == 0:
        return cap
    return min(cap, 10.0 * math.log10(PEAK * PEAK / mse))


def _curve(points):
    pts = sorted((RdPoint(*p) if not isinstance(p, RdPoint) else p for p in points),
                 key=lambda p: p.psnr_db)
    if len(pts) < 4:
        raise ValueError("BD-rate needs at least 4 points per curve")
    psnr = np.array([p.psnr_db for p in pts])
    if np.any(np.diff(psnr) <= 0):
        raise ValueError("PSNR values must be distinct")
    return psnr, np.log10([p.bitrate for p in pts])


def bd_rate(anchor, test, method: str = "cubic") -> float:
    """Average bitrate difference of ``test`` vs ``anchor`` at equal PSNR, in percent.

    ``method="cubic"`` fits a cubic polynomial of log10(rate) in PSNR (the
    classic calculation); ``"pchip"`` integrates a piecewise cubic Hermite
    interpolant instead. Negative values mean ``test`` needs fewer bits.
    """
    psnr_a, lr_a = _curve(anchor)
    psnr_t, lr_t = _curve(test)
    lo = max(psnr_a[0], psnr_t[0])
    hi = min(psnr_a[-1], psnr_t[-1])
    if not hi > lo:
        raise ValueError("PSNR ranges of the two curves do not overlap")
    if method == "cubic":
        int_a = np.polyint(np.polyfit(psnr_a, lr_a, 3))
        int_t = np.polyint(np.polyfit(psnr_t, lr_t, 3))
        area_a = np.polyval(int_a, hi) - np.polyval(int_a, lo)
        area_t = np.polyval(int_t, hi) - np.polyval(int_t, lo)
    elif method == "pchip":
        area_a = PchipInterpolator(psnr_a, lr_a).integrate(lo, hi)
        area_t = PchipInterpolator(psnr_t, lr_t).integrate(lo, hi)
    else:
        raise ValueError(f"unknown BD method {method!r}")
    avg_diff = (area_t - area_a) / (hi - lo)
    return float((10.0 ** avg_diff - 1.0) * 100.0)
