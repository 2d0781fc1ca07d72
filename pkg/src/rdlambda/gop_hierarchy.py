"""Hierarchical GOP structures and per-level model initialization."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

from .model_core import ModelCoefficients


class StructureKind(str, Enum):
    RA = "RA"
    LDP = "LDP"
    LDB = "LDB"

    @property
    def is_low_delay(self) -> bool:
        return self is not StructureKind.RA


@dataclass(frozen=True)
class FrameSlot:
    decode_index: int  # 1-based position inside the GOP, as in the HM tables
    poc: int  # display offset inside the GOP
    level: int
    ref_num: int
    qp_offset: int
    lambda_weight: float  # the structure's "lambda multiplier" column
    ref_distance: int

    def __post_init__(self):
        if self.qp_offset < 0:
            raise ValueError("qp_offset must be >= 0")


@dataclass(frozen=True)
class GopStructure:
    kind: StructureKind
    slots: tuple[FrameSlot, ...]

    @property
    def gop_length(self) -> int:
        return len(self.slots)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(sorted({s.level for s in self.slots}))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "gop_length": self.gop_length,
            "slots": [asdict(s) for s in self.slots],
        }


# (poc, level, ref num, qp offset, lambda multiplier, reference distance)
_RA_TABLE = (
    (8, 1, 3, 1, 0.442, 8),
    (4, 2, 3, 2, 0.3536, 4),
    (2, 3, 4, 3, 0.3536, 2),
    (1, 4, 4, 4, 0.68, 1),
    (3, 4, 4, 4, 0.68, 1),
    (6, 3, 3, 3, 0.3536, 2),
    (5, 4, 4, 4, 0.68, 1),
    (7, 4, 4, 4, 0.68, 1),
)
_LD_TABLE = (
    (1, 3, 4, 3, 0.4624, 1),
    (2, 2, 4, 2, 0.4624, 1),
    (3, 3, 4, 3, 0.4624, 1),
    (4, 1, 4, 1, 0.578, 1),
)

INTRA_LEVEL = 0

# relative coding efficiency (C ratio) of RA levels 1..4, normalized to level 2
RA_LEVEL_RATIOS = {1: 4.2 / 3, 2: 1.0, 3: 2.0 / 3, 4: 1.0 / 3}

RA_CENTER_ALPHA = 4.4
RA_CENTER_GAMMA = 0.005
LD_ALPHA = 2.4
LD_GAMMA = 0.005
INIT_BETA = -1.35
GAMMA_CAP_FRACTION = 0.1

# lambda weights used by picture-level allocation
RA_OMEGA = {1: 1.0, 2: 2.5, 3: 4.5, 4: 10.0}
LD_OMEGA = {1: 1.0, 2: 4.0, 3: 5.0}


def build_structure(kind) -> GopStructure:
    """Return the HM hierarchical GOP table for ``kind``.

    LDP and LDB share one table; the kind is kept only as a label.
    """
    kind = StructureKind(kind)
    table = _RA_TABLE if kind is StructureKind.RA else _LD_TABLE
    slots = tuple(
        FrameSlot(i + 1, poc, level, ref, qpo, lw, dist)
        for i, (poc, level, ref, qpo, lw, dist) in enumerate(table)
    )
    return GopStructure(kind, slots)


def default_omega(kind) -> dict[int, float]:
    kind = StructureKind(kind)
    return dict(RA_OMEGA if kind is StructureKind.RA else LD_OMEGA)


@dataclass
class LevelInitTable:
    """Per-level model coefficients plus the relative efficiency vector."""

    coefficients: dict[int, ModelCoefficients]
    relative_efficiency: dict[int, float] = field(default_factory=dict)

    def __getitem__(self, level: int) -> ModelCoefficients:
        return self.coefficients[level]

    def __setitem__(self, level: int, value: ModelCoefficients):
        self.coefficients[level] = value

    def copy(self) -> "LevelInitTable":
        return LevelInitTable(dict(self.coefficients), dict(self.relative_efficiency))


def init_coefficients(kind, target_bpp: float, relative_efficiency=None) -> LevelInitTable:
    """Hierarchical initial coefficients for every inter level of ``kind``.

    RA levels share beta; alpha and gamma scale with the relative coding
    efficiency of each level around the level-2 center values. Gamma is capped
    at a tenth of the target rate.
    """
    if not target_bpp > 0:
        raise ValueError("target_bpp must be > 0")
    kind = StructureKind(kind)
    gamma_cap = GAMMA_CAP_FRACTION * target_bpp
    coeffs = {}
    if kind is StructureKind.RA:
        eff = dict(relative_efficiency or RA_LEVEL_RATIOS)
        for level, d in eff.items():
            coeffs[level] = ModelCoefficients(
                alpha=RA_CENTER_ALPHA * d,
                beta=INIT_BETA,
                gamma=min(RA_CENTER_GAMMA * d, gamma_cap),
            )
    else:
        eff = dict(relative_efficiency or {1: 1.0, 2: 1.0, 3: 1.0})
        for level in (1, 2, 3):
            coeffs[level] = ModelCoefficients(
                alpha=LD_ALPHA, beta=INIT_BETA, gamma=min(LD_GAMMA, gamma_cap)
            )
    return LevelInitTable(coeffs, eff)


def level_efficiency_check(fitted_c) -> list[list[float]]:
    """Matrix of C ratios: ``out[i][j] = C[j] / C[i]``.

    With levels ordered 1..4, ``out[3][0]`` is the level-1 to level-4 ratio.
    """
    values = [float(c) for c in fitted_c]
    if len(values) < 2:
        raise ValueError("need at least two levels")
    return [[cj / ci for cj in values] for ci in values]
