"""Rate/distortion/lambda/QP conversions.

Two model families live here:

* the online controller model ``lambda = alpha * (bpp + gamma) ** beta``
  (:class:`ModelCoefficients`), and
* the ground-truth distortion curve ``D = max(0, C (R + B) ** -K - T)``
  (:class:`RdGroundTruth`) used by the virtual encoder and the fitting tool.

Everything is an immutable value and every function is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised when a conversion is evaluated outside its domain."""


@dataclass(frozen=True)
class ModelCoefficients:
    alpha: float
    beta: float
    gamma: float
    decay: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta < 0:
            raise ValueError(f"beta must be < 0, got {self.beta}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")


@dataclass(frozen=True)
class RdGroundTruth:
    """True R-D curve of a frame: ``D = max(0, c (R + b) ** -k - t)``."""

    c: float
    k: float
    b: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if not self.b >= 0:
            raise ValueError(f"b must be >= 0, got {self.b}")
        if not self.t >= 0:
            raise ValueError(f"t must be >= 0, got {self.t}")

    def scaled(self, factor: float) -> "RdGroundTruth":
        """Same curve with ``c`` multiplied by ``factor``."""
        return RdGroundTruth(self.c * factor, self.k, self.b, self.t)


@dataclass(frozen=True)
class QpLambdaMap:
    """``QP = c1 * ln(lambda) + c2``."""

    c1: float = 4.3
    c2: float = 14.6

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError(f"c1 must be > 0, got {self.c1}")


@dataclass(frozen=True)
class VideoGeometry:
    width: int
    height: int
    frame_rate: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0 and self.frame_rate > 0):
            raise ValueError(f"geometry must be strictly positive: {self}")

    @property
    def pixels(self) -> int:
        return self.width * self.height

    def bits_to_bpp(self, bits: float) -> float:
        """Per-frame bits to bits per pixel."""
        return bits / self.pixels

    def bpp_to_bits(self, bpp: float) -> float:
        return bpp * self.pixels

    def bitrate_to_bpp(self, bitrate: float) -> float:
        """Average bits/second to average per-frame bpp."""
        return bitrate / (self.pixels * self.frame_rate)

    def bpp_to_bitrate(self, bpp: float) -> float:
        return bpp * self.pixels * self.frame_rate


# -- controller model ---------------------------------------------------------

def lambda_from_bpp(coeffs: ModelCoefficients, bpp: float) -> float:
    """lambda = alpha * (bpp + gamma) ** beta."""
    base = bpp + coeffs.gamma
    if not base > 0:
        raise DomainError(f"bpp + gamma must be > 0, got {base}")
    return coeffs.alpha * base ** coeffs.beta


def bpp_from_lambda(coeffs: ModelCoefficients, lam: float) -> float:
    """Inverse of :func:`lambda_from_bpp`, clamped at zero."""
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam}")
    return max(0.0, (lam / coeffs.alpha) ** (1.0 / coeffs.beta) - coeffs.gamma)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def qp_from_lambda(qmap: QpLambdaMap, lam: float) -> int:
    """Integer QP for ``lam``. Not clamped to [0, 51]; callers do that."""
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam}")
    return round_half_away(qmap.c1 * math.log(lam) + qmap.c2)


def lambda_from_qp(qmap: QpLambdaMap, qp: float) -> float:
    return math.exp((qp - qmap.c2) / qmap.c1)


# -- ground-truth curve -------------------------------------------------------
#
# ``rate`` is in whatever unit ``b`` is expressed in. The virtual encoder uses
# bpp throughout, which makes ``lambda_from_rate`` a per-pixel lambda directly
# comparable with the controller model (alpha = c*k, beta = -k-1, gamma = b).

def distortion_from_rate(gt: RdGroundTruth, rate: float) -> float:
    base = rate + gt.b
    if not base > 0:
        raise DomainError(f"rate + b must be > 0, got {base}")
    return max(0.0, gt.c * base ** (-gt.k) - gt.t)


def lambda_from_rate(gt: RdGroundTruth, rate: float) -> float:
    """Negative slope of the (unclamped) distortion curve at ``rate``."""
    base = rate + gt.b
    if not base > 0:
        raise DomainError(f"rate + b must be > 0, got {base}")
    return gt.c * gt.k * base ** (-gt.k - 1.0)


def rate_from_lambda_gt(gt: RdGroundTruth, lam: float) -> float:
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam}")
    return max(0.0, (gt.c * gt.k / lam) ** (1.0 / (gt.k + 1.0)) - gt.b)


def equivalent_coefficients(gt: RdGroundTruth) -> ModelCoefficients:
    """Controller coefficients that reproduce ``gt``'s lambda(R) exactly."""
    return ModelCoefficients(alpha=gt.c * gt.k, beta=-gt.k - 1.0, gamma=gt.b)
