"""GOP- and picture-level bit allocation.

All rates here are bpp. GOP budgets are bpp summed over frames.

The GOP budget deducts two things from the sequence average: the amortized
overhead of the current intra period's I frame, and a ``1/SW`` share of the
accumulated non-I overflow. The overflow accumulator is reduced when a GOP
budget schedules its repayment (:func:`commit_compensation`), so the
per-frame bookkeeping in :func:`record_frame` only has to add
``actual - target``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .model_core import ModelCoefficients

MIN_RATE_BITS = 100.0
DEFAULT_SMOOTH_WINDOW = 40
LAMBDA_SEARCH_BOUNDS = (1e-4, 1e6)
LAMBDA_SEARCH_ITERATIONS = 100


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class AllocatorState:
    r_avg: float
    intra_period: int
    smooth_window: int = DEFAULT_SMOOTH_WINDOW
    r_am: float = 0.0
    overflow: float = 0.0
    frames_left: int = 0  # frames still paying the current amortization
    amortization_log: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.r_avg > 0:
            raise ValueError("r_avg must be > 0")
        if self.intra_period < 1:
            raise ValueError("intra_period must be >= 1")
        if self.smooth_window < 1:
            raise ValueError("smooth_window must be >= 1")


@dataclass(frozen=True)
class FrameBudget:
    target_bpp: float
    lambda_weight: float
    level: int
    min_rate_bits: float = MIN_RATE_BITS


@dataclass(frozen=True)
class PictureAllocation:
    budgets: tuple[FrameBudget, ...]
    central_lambda: float
    total_bpp: float
    exact: bool  # False when the budget was out of reach (best achievable)

    def __iter__(self):
        return iter(self.budgets)

    def __len__(self):
        return len(self.budgets)

    @property
    def targets(self) -> list[float]:
        return [b.target_bpp for b in self.budgets]


def gop_budget(state: AllocatorState, n_gop: int, n_amortized: int | None = None) -> float:
    """Raw GOP budget ``(R_avg - R_am - R_of/SW) * N_GOP``.

    ``n_amortized`` is the number of GOP frames still inside the current
    amortization span (defaults to all of them). May be negative; see
    :func:`clamp_gop_budget`.
    """
    if n_gop < 1:
        raise ValueError("n_gop must be >= 1")
    if n_amortized is None:
        n_amortized = n_gop
    return (state.r_avg - state.overflow / state.smooth_window) * n_gop - state.r_am * n_amortized


def clamp_gop_budget(r_gop: float, n_gop: int, min_rate_bpp: float) -> float:
    return max(r_gop, n_gop * min_rate_bpp)


def commit_compensation(state: AllocatorState, n_gop: int) -> tuple[AllocatorState, float]:
    """Schedule repayment of ``n_gop / SW`` of the overflow into a GOP budget."""
    paid = state.overflow * n_gop / state.smooth_window
    return replace(state, overflow=state.overflow - paid), paid


def amortize_intra(state: AllocatorState, r_i0: float, r_i2: float,
                   span: int | None = None) -> AllocatorState:
    """Start amortizing the I-frame overhead ``r_i2 - r_i0``.

    ``span`` is the number of non-I frames that will pay it back; it defaults
    to ``intra_period - 1``. The I frame itself records ``r_i0``, so the
    overflow accumulator is untouched.
    """
    if span is None:
        span = state.intra_period - 1
    overhead = r_i2 - r_i0
    if span < 1:
        if overhead != 0:
            raise AllocationError("no frames left to amortize a non-zero I-frame overhead")
        return replace(state, r_am=0.0, frames_left=0, amortization_log=())
    return replace(state, r_am=overhead / span, frames_left=span, amortization_log=())


def record_frame(state: AllocatorState, r_i0: float, r_actual: float,
                 is_intra: bool) -> AllocatorState:
    """Book one encoded frame. Returns the new state.

    Non-I frames add ``r_actual - r_i0`` to the overflow and pay one share of
    the current amortization.
    """
    if is_intra:
        return state
    overflow = state.overflow + (r_actual - r_i0)
    if state.frames_left > 0:
        frames_left = state.frames_left - 1
        log = state.amortization_log + (state.r_am,)
        r_am = state.r_am if frames_left > 0 else 0.0
        return replace(state, overflow=overflow, frames_left=frames_left,
                       r_am=r_am, amortization_log=log)
    return replace(state, overflow=overflow)


def intra_target(state: AllocatorState, p_frame_estimate: float, kappa: float = 4.0) -> float:
    """Stand-in I-frame refinement: ``kappa`` times the P-style estimate,
    capped at half of the intra period's budget."""
    if not p_frame_estimate > 0:
        raise ValueError("p_frame_estimate must be > 0")
    return min(kappa * p_frame_estimate, 0.5 * state.intra_period * state.r_avg)


def allocate_pictures(
    coeffs: list[ModelCoefficients],
    omegas: list[float],
    levels: list[int],
    r_gop: float,
    min_rate_bpp: float,
    min_rate_bits: float = MIN_RATE_BITS,
) -> PictureAllocation:
    """Split ``r_gop`` over the frames by solving for one central lambda.

    Frame ``i`` gets ``(lambda * omega_i / alpha_i) ** (1 / beta_i) - gamma_i``,
    floored at ``min_rate_bpp``; lambda is bisected until the floored sum
    matches ``r_gop``.
    """
    if not (len(coeffs) == len(omegas) == len(levels)) or not coeffs:
        raise ValueError("coeffs, omegas and levels must be non-empty and aligned")
    alpha = np.array([c.alpha for c in coeffs], dtype=np.float64)
    beta = np.array([c.beta for c in coeffs], dtype=np.float64)
    gamma = np.array([c.gamma for c in coeffs], dtype=np.float64)
    omega = np.array(omegas, dtype=np.float64)
    lo, hi = LAMBDA_SEARCH_BOUNDS
    lam, total, status = kernels.central_lambda(
        alpha, beta, gamma, omega, float(r_gop), float(min_rate_bpp),
        lo, hi, LAMBDA_SEARCH_ITERATIONS,
    )
    budgets = []
    for c, w, level in zip(coeffs, omegas, levels):
        r = (lam * w / c.alpha) ** (1.0 / c.beta) - c.gamma
        budgets.append(FrameBudget(max(r, min_rate_bpp), w, level, min_rate_bits))
    return PictureAllocation(tuple(budgets), lam, total, status == kernels.CONVERGED)
