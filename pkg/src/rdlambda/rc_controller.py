"""Frame-level ABR controller and the CQP reference path.

Per frame, in decode order: GOP budget and central-lambda allocation (once per
GOP) -> target bpp -> lambda -> QP -> consistency clamp -> encode -> book the
rate -> LMS update of the frame level's coefficients.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields, replace

from . import bit_allocation as ba
from .coefficient_update import (
    UpdateObservation,
    UpdateStrengths,
    lms_update,
    scene_change_reset,
)
from .eval_metrics import delta_r, psnr_from_mse
from .gop_hierarchy import (
    INTRA_LEVEL,
    GopStructure,
    StructureKind,
    build_structure,
    default_omega,
    init_coefficients,
)
from .model_core import (
    ModelCoefficients,
    QpLambdaMap,
    VideoGeometry,
    lambda_from_bpp,
    lambda_from_qp,
    qp_from_lambda,
)
from .virtual_encoder import SyntheticSequence, encode_frame

QP_MIN, QP_MAX = 0, 51
LAMBDA_CLAMP = (0.01, 1e5)
SAME_LEVEL_QP_DELTA = 3
ANY_FRAME_QP_DELTA = 10
DEFAULT_KAPPA = 4.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    kind: StructureKind
    geometry: VideoGeometry
    target_bitrate: float  # bits/second
    intra_period: int = 32
    smooth_window: int = ba.DEFAULT_SMOOTH_WINDOW
    qp_lambda_map: QpLambdaMap = QpLambdaMap()
    seed: int = 0
    kappa: float = DEFAULT_KAPPA
    omega: dict[int, float] | None = None
    scale_all_strengths: bool = False
    reset_on_scene_change: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", StructureKind(self.kind))
        if not self.target_bitrate > 0:
            raise ConfigError("target_bitrate must be > 0")
        if self.intra_period < 2:
            raise ConfigError("intra_period must be >= 2")
        if self.smooth_window < 1:
            raise ConfigError("smooth_window must be >= 1")
        if self.kappa <= 0:
            raise ConfigError("kappa must be > 0")
        gop = build_structure(self.kind).gop_length
        if self.kind is StructureKind.RA and self.intra_period % gop:
            raise ConfigError(f"RA intra_period must be a multiple of {gop}")

    @property
    def r_avg(self) -> float:
        """Average target in bpp per frame."""
        return self.geometry.bitrate_to_bpp(self.target_bitrate)

    @property
    def omegas(self) -> dict[int, float]:
        return dict(self.omega) if self.omega else default_omega(self.kind)


@dataclass(frozen=True)
class FrameRecord:
    poc: int
    decode_index: int
    level: int
    target_bpp: float
    recorded_bpp: float
    actual_bpp: float
    lambda_: float
    qp_raw: int
    qp_final: int
    mse: float
    psnr_db: float


FRAME_LOG_COLUMNS = tuple(
    "lambda" if f.name == "lambda_" else f.name for f in fields(FrameRecord)
)


@dataclass(frozen=True)
class ScheduledFrame:
    decode_index: int
    poc: int
    level: int  # 0 for I frames
    slot_level: int  # level of the GOP slot, used to allocate I frames as P
    qp_offset: int
    is_intra: bool


def build_schedule(structure: GopStructure, n_frames: int, intra_period: int):
    """Decode-order frames grouped into GOPs.

    POC 0 is a one-frame GOP of its own. A trailing partial GOP keeps the
    slots whose POC fits, in table order. Every POC that is a multiple of
    ``intra_period`` is coded as an I frame in place of its slot.
    """
    gops = [[ScheduledFrame(0, 0, INTRA_LEVEL, 1, 0, True)]] if n_frames > 0 else []
    decode = 1
    start = 0
    while start + 1 < n_frames:
        gop = []
        for slot in structure.slots:
            poc = start + slot.poc
            if poc >= n_frames:
                continue
            intra = poc % intra_period == 0
            gop.append(ScheduledFrame(
                decode, poc,
                INTRA_LEVEL if intra else slot.level,
                slot.level,
                0 if intra else slot.qp_offset,
                intra,
            ))
            decode += 1
        gops.append(gop)
        start += structure.gop_length
    return gops


def clamp_qp(qp_raw: int, last_same_level: int | None = None,
             last_any: int | None = None) -> int:
    """Restrict QP to +-3 of the last frame of the same level and +-10 of the
    previous frame, within [0, 51]. The same-level window wins if the two
    windows do not intersect."""
    lo, hi = QP_MIN, QP_MAX
    if last_same_level is not None:
        lo = max(lo, last_same_level - SAME_LEVEL_QP_DELTA)
        hi = min(hi, last_same_level + SAME_LEVEL_QP_DELTA)
    if last_any is not None:
        lo2 = max(lo, last_any - ANY_FRAME_QP_DELTA)
        hi2 = min(hi, last_any + ANY_FRAME_QP_DELTA)
        if lo2 <= hi2:
            lo, hi = lo2, hi2
    return min(max(qp_raw, lo), hi)


@dataclass
class AmortizationEntry:
    poc: int
    r_i0: float
    r_i2: float
    span: int
    charged: list[float] = field(default_factory=list)


class RateController:
    """One ABR encoding session over a sequence of ``n_frames`` frames."""

    def __init__(self, config: ControllerConfig, n_frames: int):
        if n_frames < 1:
            raise ConfigError("n_frames must be >= 1")
        self.config = config
        self.n_frames = n_frames
        self.structure = build_structure(config.kind)
        self.gops = build_schedule(self.structure, n_frames, config.intra_period)
        self.r_avg = config.r_avg
        self.min_rate_bpp = ba.MIN_RATE_BITS / config.geometry.pixels
        self.strengths = UpdateStrengths.for_target(self.r_avg, config.scale_all_strengths)
        self.gamma_max = 0.1 * self.r_avg
        self.omegas = config.omegas
        self.table = init_coefficients(config.kind, self.r_avg)
        self.intra_coeffs = self._initial_intra()
        self.state = ba.AllocatorState(self.r_avg, config.intra_period, config.smooth_window)
        self.records: list[FrameRecord] = []
        self.amortizations: list[AmortizationEntry] = []
        self.gop_lambdas: list[float] = []
        self._gop_index = 0
        self._pending: deque = deque()
        self._last_qp_level: dict[int, int] = {}
        self._last_qp: int | None = None
        self._scene_changes: deque = deque()
        # non-I frames left before the next I frame, by decode index
        self._span_after: dict[int, int] = {}
        order = [f for gop in self.gops for f in gop]
        for i, f in enumerate(order):
            if f.is_intra:
                n = 0
                for g in order[i + 1:]:
                    if g.is_intra:
                        break
                    n += 1
                self._span_after[f.decode_index] = n

    def _initial_intra(self) -> ModelCoefficients:
        return self.table[1]

    # -- state hooks ---------------------------------------------------------

    def scene_change_reset(self) -> None:
        """Reset every level's coefficients (and the intra model) to init."""
        scene_change_reset(self.table, self.config.kind, self.r_avg)
        self.intra_coeffs = self._initial_intra()

    @property
    def finished(self) -> bool:
        return not self._pending and self._gop_index >= len(self.gops)

    # -- allocation ----------------------------------------------------------

    def _allocate(self, frames, r_gop):
        coeffs = [self.table[f.slot_level] for f in frames]
        omegas = [self.omegas[f.slot_level] for f in frames]
        levels = [f.level for f in frames]
        return ba.allocate_pictures(coeffs, omegas, levels, r_gop, self.min_rate_bpp)

    def _start_gop(self, seq: SyntheticSequence | None) -> None:
        gop = self.gops[self._gop_index]
        self._gop_index += 1
        if seq is not None and self.config.reset_on_scene_change:
            while self._scene_changes and any(f.poc >= self._scene_changes[0] for f in gop):
                self._scene_changes.popleft()
                self.scene_change_reset()
        n = len(gop)
        n_amortized = 0
        for f in gop:
            if f.is_intra:
                break
            n_amortized += 1
        n_amortized = min(n_amortized, self.state.frames_left)
        raw = ba.gop_budget(self.state, n, n_amortized)
        self.state, _ = ba.commit_compensation(self.state, n)
        r_gop = ba.clamp_gop_budget(raw, n, self.min_rate_bpp)
        alloc = self._allocate(gop, r_gop)
        self._book_excess(alloc.total_bpp - raw)
        self.gop_lambdas.append(alloc.central_lambda)
        self._pending = deque(zip(gop, alloc.targets))

    def _book_excess(self, excess: float) -> None:
        # budget the allocation could not honour stays in the overflow account
        self.state = replace(self.state, overflow=self.state.overflow + excess)

    def _reallocate_after_intra(self) -> None:
        if not self._pending:
            return
        frames = [f for f, _ in self._pending]
        planned = sum(t for _, t in self._pending)
        n_am = 0
        for f in frames:
            if f.is_intra:
                break
            n_am += 1
        n_am = min(n_am, self.state.frames_left)
        budget = planned - self.state.r_am * n_am
        floored = max(budget, len(frames) * self.min_rate_bpp)
        alloc = self._allocate(frames, floored)
        self._book_excess(alloc.total_bpp - budget)
        self._pending = deque(zip(frames, alloc.targets))

    # -- per-frame pipeline ----------------------------------------------------

    def step(self, seq: SyntheticSequence) -> FrameRecord:
        """Encode the next frame (decode order) of ``seq``."""
        if not self._pending:
            if self._gop_index >= len(self.gops):
                raise IndexError("all frames have been encoded")
            if self._gop_index == 0:
                self._scene_changes = deque(seq.scene_changes)
            self._start_gop(seq)
        frame, target = self._pending.popleft()
        cfg = self.config

        if frame.is_intra:
            coded_target = ba.intra_target(self.state, target, cfg.kappa)
            coeffs = self.intra_coeffs
        else:
            coded_target = target
            coeffs = self.table[frame.level]
        lam = lambda_from_bpp(coeffs, coded_target)
        lam = min(max(lam, LAMBDA_CLAMP[0]), LAMBDA_CLAMP[1])
        qp_raw = qp_from_lambda(cfg.qp_lambda_map, lam)
        qp = clamp_qp(qp_raw, self._last_qp_level.get(frame.level), self._last_qp)

        bits, mse = encode_frame(seq, frame.poc, frame.level, qp)
        actual = cfg.geometry.bits_to_bpp(bits)
        lam_used = lambda_from_qp(cfg.qp_lambda_map, qp)

        obs = UpdateObservation(coded_target, lam_used, actual)
        updated = lms_update(coeffs, obs, self.strengths, self.gamma_max)
        if frame.is_intra:
            self.intra_coeffs = updated
            span = self._span_after[frame.decode_index]
            if span > 0:
                self.state = ba.amortize_intra(self.state, target, actual, span)
                self.amortizations.append(AmortizationEntry(frame.poc, target, actual, span))
            else:
                self.state = replace(self.state, r_am=0.0, frames_left=0)
            self._reallocate_after_intra()
            recorded = target
        else:
            self.table[frame.level] = updated
            paying = self.state.frames_left > 0
            r_am = self.state.r_am
            self.state = ba.record_frame(self.state, target, actual, False)
            if paying and self.amortizations:
                self.amortizations[-1].charged.append(r_am)
            recorded = actual

        self._last_qp_level[frame.level] = qp
        self._last_qp = qp
        rec = FrameRecord(
            poc=frame.poc, decode_index=frame.decode_index, level=frame.level,
            target_bpp=target, recorded_bpp=recorded, actual_bpp=actual,
            lambda_=lam, qp_raw=qp_raw, qp_final=qp, mse=mse, psnr_db=psnr_from_mse(mse),
        )
        self.records.append(rec)
        return rec

    def run_abr(self, seq: SyntheticSequence) -> list[FrameRecord]:
        if len(seq) != self.n_frames:
            raise ConfigError(f"sequence has {len(seq)} frames, controller expects {self.n_frames}")
        while not self.finished:
            self.step(seq)
        return self.records

    def run_cqp(self, seq: SyntheticSequence, base_qp: int) -> list[FrameRecord]:
        """Fixed QP per level (base + structure offset); no RC state is touched."""
        qmap = self.config.qp_lambda_map
        for gop in self.gops:
            for frame in gop:
                qp = min(max(base_qp + frame.qp_offset, QP_MIN), QP_MAX)
                bits, mse = encode_frame(seq, frame.poc, frame.level, qp)
                actual = self.config.geometry.bits_to_bpp(bits)
                self.records.append(FrameRecord(
                    poc=frame.poc, decode_index=frame.decode_index, level=frame.level,
                    target_bpp=actual, recorded_bpp=actual, actual_bpp=actual,
                    lambda_=lambda_from_qp(qmap, qp), qp_raw=qp, qp_final=qp,
                    mse=mse, psnr_db=psnr_from_mse(mse),
                ))
        self._gop_index = len(self.gops)
        return self.records


def parse_mode(mode) -> tuple[str, int | None]:
    """Accept ``"ABR"``, ``("CQP", qp)`` or ``"CQP:<qp>"``."""
    if isinstance(mode, tuple):
        name, qp = mode
        name = str(name).upper()
    else:
        name, _, qp_text = str(mode).partition(":")
        name = name.upper()
        qp = int(qp_text) if qp_text else None
    if name == "ABR":
        return "ABR", None
    if name == "CQP":
        if qp is None or not QP_MIN <= int(qp) <= QP_MAX:
            raise ConfigError("CQP mode needs a base QP in [0, 51]")
        return "CQP", int(qp)
    raise ConfigError(f"unknown mode {mode!r}")


def summarize(config: ControllerConfig, records, mode: str) -> dict:
    n = len(records)
    fr = config.geometry.frame_rate
    pixels = config.geometry.pixels
    total_bits = sum(r.actual_bpp for r in records) * pixels
    bitrate = total_bits * fr / n
    per_level = []
    for level in sorted({r.level for r in records}):
        rs = [r for r in records if r.level == level]
        per_level.append({
            "level": level,
            "frames": len(rs),
            "mean_bpp": sum(r.actual_bpp for r in rs) / len(rs),
            "mean_psnr_db": sum(r.psnr_db for r in rs) / len(rs),
            "mean_qp": sum(r.qp_final for r in rs) / len(rs),
        })
    abr = mode == "ABR"
    target_bits = config.target_bitrate * n / fr if abr else None
    return {
        "mode": mode,
        "frames": n,
        "total_bits": total_bits,
        "bitrate": bitrate,
        "target_bits": target_bits,
        "delta_r_percent": delta_r(total_bits, target_bits) if abr else None,
        "mean_psnr_db": sum(r.psnr_db for r in records) / n,
        "per_level": per_level,
    }


def run(config: ControllerConfig, sequence: SyntheticSequence, mode="ABR"):
    """Encode ``sequence`` in ABR or CQP mode. Returns ``(records, summary)``."""
    if len(sequence) == 0:
        raise ConfigError("sequence is empty")
    name, qp = parse_mode(mode)
    ctl = RateController(config, len(sequence))
    if name == "ABR":
        records = ctl.run_abr(sequence)
    else:
        records = ctl.run_cqp(sequence, qp)
    return records, summarize(config, records, name)


def frame_log_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FRAME_LOG_COLUMNS)
    for r in records:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
    return buf.getvalue()


def summary_json(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def qp_window_violations(records) -> int:
    """Frames whose final QP breaks the same-level or consecutive-frame window."""
    bad = 0
    last_level: dict[int, int] = {}
    last = None
    for r in sorted(records, key=lambda r: r.decode_index):
        q = r.qp_final
        if not QP_MIN <= q <= QP_MAX:
            bad += 1
        elif r.level in last_level and abs(q - last_level[r.level]) > SAME_LEVEL_QP_DELTA:
            bad += 1
        elif last is not None and abs(q - last) > ANY_FRAME_QP_DELTA:
            bad += 1
        last_level[r.level] = q
        last = q
    return bad
