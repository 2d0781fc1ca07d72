"""Deterministic synthetic encoder with ground-truth R-D curves.

A frame's rate at a given QP follows from inverting the ground-truth
lambda(R) relation; distortion follows from the noiseless rate. Rates are in
bpp, so the induced lambda is per pixel and directly comparable with the
controller model.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bit_allocation import MIN_RATE_BITS
from .curve_fitting import RdSample
from .model_core import (
    QpLambdaMap,
    RdGroundTruth,
    VideoGeometry,
    distortion_from_rate,
    lambda_from_qp,
    rate_from_lambda_gt,
)

SCHEMA_VERSION = 1

# C multipliers per frame level. Inter levels follow the RA C ratios
# 4.2:3:2:1 normalized to level 2; the intra level is costlier than level 1.
DEFAULT_LEVEL_EFFICIENCY = {0: 6.0, 1: 4.2 / 3, 2: 1.0, 3: 2.0 / 3, 4: 1.0 / 3}

C_RANGE = (0.5, 50.0)
K_RANGE = (0.85, 1.15)
B_RANGE = (0.0, 0.05)  # bpp, i.e. up to 0.05 * W * H bits per frame
T_RANGE = (0.0, 0.5)

PROFILES = ("stationary", "two_scene", "ramp")


@dataclass(frozen=True)
class SyntheticSequence:
    geometry: VideoGeometry
    frames: tuple[tuple[RdGroundTruth, int], ...]  # (ground truth, scene id)
    scene_changes: tuple[int, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    level_efficiency: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_LEVEL_EFFICIENCY)
    )
    qp_map: QpLambdaMap = QpLambdaMap()

    def __post_init__(self):
        if not 0.0 <= self.noise_sigma <= 0.5:
            raise ValueError("noise_sigma must be in [0, 0.5]")
        if any(b <= a for a, b in zip(self.scene_changes, self.scene_changes[1:])):
            raise ValueError("scene_changes must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @property
    def min_rate_bpp(self) -> float:
        return MIN_RATE_BITS / self.geometry.pixels

    def ground_truth(self, frame_index: int, level: int) -> RdGroundTruth:
        base = self.frames[frame_index][0]
        return base.scaled(self.level_efficiency.get(level, 1.0))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        g = self.geometry
        return {
            "schema_version": SCHEMA_VERSION,
            "geometry": {"width": g.width, "height": g.height, "frame_rate": g.frame_rate},
            "frames": [
                {"c": gt.c, "k": gt.k, "b": gt.b, "t": gt.t, "scene": scene}
                for gt, scene in self.frames
            ],
            "scene_changes": list(self.scene_changes),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "level_efficiency": {str(k): v for k, v in sorted(self.level_efficiency.items())},
            "qp_map": {"c1": self.qp_map.c1, "c2": self.qp_map.c2},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSequence":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported sequence schema {data.get('schema_version')!r}")
        return cls(
            geometry=VideoGeometry(**data["geometry"]),
            frames=tuple(
                (RdGroundTruth(f["c"], f["k"], f["b"], f["t"]), int(f["scene"]))
                for f in data["frames"]
            ),
            scene_changes=tuple(data["scene_changes"]),
            noise_sigma=data["noise_sigma"],
            seed=data["seed"],
            level_efficiency={int(k): v for k, v in data["level_efficiency"].items()},
            qp_map=QpLambdaMap(**data["qp_map"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSequence":
        return cls.from_dict(json.loads(text))


def frame_noise(seed: int, frame_index: int, sigma: float) -> float:
    """Multiplicative lognormal rate noise for one frame, keyed by (seed, index)."""
    if sigma == 0:
        return 1.0
    z = np.random.default_rng([seed, frame_index]).standard_normal()
    return math.exp(sigma * z)


def encode_frame(seq: SyntheticSequence, frame_index: int, level: int, qp: int):
    """Encode one frame at ``qp``. Returns ``(bits, mse)``."""
    if not 0 <= qp <= 51:
        raise ValueError(f"qp must be in [0, 51], got {qp}")
    gt = seq.ground_truth(frame_index, level)
    lam = lambda_from_qp(seq.qp_map, qp)
    r_clean = max(seq.min_rate_bpp, rate_from_lambda_gt(gt, lam))
    r = r_clean * frame_noise(seq.seed, frame_index, seq.noise_sigma)
    mse = distortion_from_rate(gt, r_clean)
    return seq.geometry.bpp_to_bits(r), mse


def random_ground_truth(rng: np.random.Generator) -> RdGroundTruth:
    """Draw a curve from the fixture ranges (C log-uniform)."""
    c = float(math.exp(rng.uniform(math.log(C_RANGE[0]), math.log(C_RANGE[1]))))
    return RdGroundTruth(
        c=c,
        k=float(rng.uniform(*K_RANGE)),
        b=float(rng.uniform(*B_RANGE)),
        t=float(rng.uniform(*T_RANGE)),
    )


def make_sequence(
    profile: str,
    n_frames: int,
    seed: int,
    geometry: VideoGeometry | None = None,
    noise_sigma: float = 0.05,
    base: RdGroundTruth | None = None,
    scene_factor: float = 4.0,
    level_efficiency: dict[int, float] | None = None,
) -> SyntheticSequence:
    """Build a fixture sequence.

    ``stationary`` repeats one curve; ``two_scene`` multiplies C by
    ``scene_factor`` from the midpoint on; ``ramp`` drifts C linearly from
    -30% to +30%. ``base`` overrides the curve drawn from ``seed``.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    geometry = geometry or VideoGeometry(832, 480, 30.0)
    rng = np.random.default_rng(seed)
    gt = base or random_ground_truth(rng)
    scene_changes: tuple[int, ...] = ()
    if profile == "stationary":
        frames = tuple((gt, 0) for _ in range(n_frames))
    elif profile == "two_scene":
        mid = n_frames // 2
        scene_changes = (mid,) if mid > 0 else ()
        frames = tuple(
            (gt if i < mid else gt.scaled(scene_factor), int(i >= mid)) for i in range(n_frames)
        )
    else:
        span = max(n_frames - 1, 1)
        frames = tuple((gt.scaled(0.7 + 0.6 * i / span), 0) for i in range(n_frames))
    return SyntheticSequence(
        geometry=geometry,
        frames=frames,
        scene_changes=scene_changes,
        noise_sigma=noise_sigma,
        seed=seed,
        level_efficiency=dict(level_efficiency or DEFAULT_LEVEL_EFFICIENCY),
    )


def curve_samples(
    gt: RdGroundTruth,
    qps=range(4, 52),
    geometry: VideoGeometry | None = None,
    mse_noise: float = 0.0,
    rng: np.random.Generator | None = None,
    qp_map: QpLambdaMap = QpLambdaMap(),
):
    """Encode one frame of curve ``gt`` at every QP in ``qps``.

    Returns ``RdSample`` rows for the fitting tool. ``mse_noise`` applies a
    lognormal multiplicative error to each distortion value.
    """
    if mse_noise and rng is None:
        raise ValueError("mse_noise needs an rng")
    seq = SyntheticSequence(
        geometry=geometry or VideoGeometry(832, 480, 30.0),
        frames=((gt, 0),),
        level_efficiency={1: 1.0},
        qp_map=qp_map,
    )
    out = []
    for qp in qps:
        bits, mse = encode_frame(seq, 0, 1, qp)
        if mse_noise:
            mse *= math.exp(mse_noise * rng.standard_normal())
        out.append(RdSample(int(qp), seq.geometry.bits_to_bpp(bits), mse))
    return out
