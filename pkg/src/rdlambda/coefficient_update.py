"""LMS update of the per-level (alpha, beta, gamma) coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .gop_hierarchy import LevelInitTable, init_coefficients
from .model_core import DomainError, ModelCoefficients

DECAY_FACTOR = 0.99

ALPHA_BOUNDS = (0.05, 500.0)
BETA_BOUNDS = (-3.0, -0.1)


@dataclass(frozen=True)
class UpdateStrengths:
    sigma_alpha: float
    sigma_beta: float
    sigma_gamma: float

    def __post_init__(self):
        if min(self.sigma_alpha, self.sigma_beta, self.sigma_gamma) < 0:
            raise ValueError("update strengths must be >= 0")

    @classmethod
    def for_target(cls, target_bpp: float, scale_all: bool = False) -> "UpdateStrengths":
        """Default strengths (0.05, 0.2, 1e-6).

        Only the gamma strength is multiplied by the target bpp unless
        ``scale_all`` is set, in which case all three are.
        """
        if scale_all:
            return cls(0.05 * target_bpp, 0.2 * target_bpp, 1e-6 * target_bpp)
        return cls(0.05, 0.2, 1e-6 * target_bpp)

    def scaled(self, factor: float) -> "UpdateStrengths":
        return UpdateStrengths(
            self.sigma_alpha * factor, self.sigma_beta * factor, self.sigma_gamma * factor
        )


@dataclass(frozen=True)
class UpdateObservation:
    bpp_target: float
    lambda_used: float
    bpp_actual: float

    def __post_init__(self):
        if not (self.bpp_target > 0 and self.lambda_used > 0 and self.bpp_actual > 0):
            raise ValueError(f"observation values must be > 0: {self}")


def log_error(coeffs: ModelCoefficients, lambda_used: float, bpp_actual: float) -> float:
    """ln(lambda_0) - ln(lambda_1), lambda_1 being the model at the actual rate."""
    base = bpp_actual + coeffs.gamma
    if not base > 0:
        raise DomainError(f"bpp_actual + gamma must be > 0, got {base}")
    return math.log(lambda_used) - (math.log(coeffs.alpha) + coeffs.beta * math.log(base))


def squared_error(coeffs: ModelCoefficients, lambda_used: float, bpp_actual: float) -> float:
    err = log_error(coeffs, lambda_used, bpp_actual)
    return 0.5 * err * err


def lms_gradient(coeffs: ModelCoefficients, lambda_used: float, bpp_actual: float):
    """Analytic partials of e^2 with respect to (alpha, beta, gamma)."""
    err = log_error(coeffs, lambda_used, bpp_actual)
    base = bpp_actual + coeffs.gamma
    return (
        -err / coeffs.alpha,
        -err * math.log(base),
        -err * coeffs.beta / base,
    )


def _clip(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def lms_update(
    coeffs: ModelCoefficients,
    obs: UpdateObservation,
    strengths: UpdateStrengths,
    gamma_max: float | None = None,
) -> ModelCoefficients:
    """One gradient step on e^2 = 0.5 (ln lambda_0 - ln lambda_1)^2.

    Effective strengths are ``sigma * decay``; decay shrinks by 0.99 per call.
    ``gamma_max`` defaults to a tenth of ``obs.bpp_target``.
    """
    err = log_error(coeffs, obs.lambda_used, obs.bpp_actual)
    base = obs.bpp_actual + coeffs.gamma
    d = coeffs.decay
    alpha = coeffs.alpha + strengths.sigma_alpha * d * err / coeffs.alpha
    beta = coeffs.beta + strengths.sigma_beta * d * err * math.log(base)
    gamma = coeffs.gamma + strengths.sigma_gamma * d * err * coeffs.beta / base
    if gamma_max is None:
        gamma_max = 0.1 * obs.bpp_target
    return ModelCoefficients(
        alpha=_clip(alpha, *ALPHA_BOUNDS),
        beta=_clip(beta, *BETA_BOUNDS),
        gamma=_clip(gamma, 0.0, gamma_max),
        decay=DECAY_FACTOR * d,
    )


def scene_change_reset(table: LevelInitTable, kind, target_bpp: float) -> None:
    """Put every level of ``table`` back to its initial coefficients, decay 1."""
    fresh = init_coefficients(kind, target_bpp, table.relative_efficiency or None)
    table.coefficients.clear()
    table.coefficients.update(fresh.coefficients)
