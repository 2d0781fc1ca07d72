"""Command-line front end: ``rdlambda {fit,simulate,sweep,bdrate,structures,replay}``.

Exit codes: 0 success, 2 usage, 3 bad input data, 4 internal invariant breach.
Set ``RDLAMBDA_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) for progress logging.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .curve_fitting import (
    DEFAULT_QP_RANGES,
    MalformedInputError,
    fit_report,
    read_samples_csv,
    report_to_csv,
)
from .eval_metrics import RdPoint, bd_rate, delta_r
from .gop_hierarchy import StructureKind, build_structure
from .model_core import QpLambdaMap, VideoGeometry
from .rc_controller import (
    ConfigError,
    ControllerConfig,
    frame_log_csv,
    parse_mode,
    qp_window_violations,
    run,
    summary_json,
)
from .virtual_encoder import PROFILES, SyntheticSequence, make_sequence

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
LOG_ENV = "RDLAMBDA_LOG_LEVEL"
DEFAULT_SWEEP_QPS = (22, 27, 32, 37)
MANIFEST_NAME = "manifest.json"

log = logging.getLogger("rdlambda")

CONFIG_DEFAULTS = {
    "geometry": {"width": 832, "height": 480, "frame_rate": 30.0},
    "kind": "RA",
    "target_bitrate": 1_000_000.0,
    "intra_period": 32,
    "smooth_window": 40,
    "n_frames": 300,
    "profile": "stationary",
    "noise_sigma": 0.05,
    "seed": 0,
    "qp_lambda_map": {"c1": 4.3, "c2": 14.6},
}


class UsageError(Exception):
    pass


class InputDataError(Exception):
    pass


class InvariantError(Exception):
    pass


# -- config ---------------------------------------------------------------------

def load_config(path: str | os.PathLike) -> dict:
    """Read a config JSON document and fill in defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputDataError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputDataError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return normalize_config(raw)


def normalize_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise InputDataError("config must be a JSON object")
    unknown = set(raw) - set(CONFIG_DEFAULTS)
    if unknown:
        raise InputDataError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = json.loads(json.dumps(CONFIG_DEFAULTS))
    for key, value in raw.items():
        if isinstance(cfg[key], dict):
            if not isinstance(value, dict):
                raise InputDataError(f"config key {key!r} must be an object")
            extra = set(value) - set(cfg[key])
            if extra:
                raise InputDataError(f"unknown keys in {key!r}: {', '.join(sorted(extra))}")
            cfg[key].update(value)
        else:
            cfg[key] = value
    if cfg["profile"] not in PROFILES:
        raise InputDataError(f"profile must be one of {', '.join(PROFILES)}")
    if not isinstance(cfg["n_frames"], int) or cfg["n_frames"] < 1:
        raise InputDataError("n_frames must be a positive integer")
    try:
        StructureKind(cfg["kind"])
    except ValueError:
        raise InputDataError(f"kind must be one of {', '.join(k.value for k in StructureKind)}") from None
    _controller_config(cfg, cfg["target_bitrate"])  # validate early
    return cfg


def _geometry(cfg: dict) -> VideoGeometry:
    try:
        return VideoGeometry(**cfg["geometry"])
    except (TypeError, ValueError) as exc:
        raise InputDataError(f"geometry: {exc}") from None


def _controller_config(cfg: dict, target_bitrate: float) -> ControllerConfig:
    try:
        return ControllerConfig(
            kind=cfg["kind"],
            geometry=_geometry(cfg),
            target_bitrate=float(target_bitrate),
            intra_period=int(cfg["intra_period"]),
            smooth_window=int(cfg["smooth_window"]),
            qp_lambda_map=QpLambdaMap(**cfg["qp_lambda_map"]),
            seed=int(cfg["seed"]),
        )
    except (ConfigError, TypeError, ValueError) as exc:
        raise InputDataError(f"config: {exc}") from None


def _sequence(cfg: dict) -> SyntheticSequence:
    try:
        seq = make_sequence(cfg["profile"], cfg["n_frames"], int(cfg["seed"]),
                            geometry=_geometry(cfg), noise_sigma=float(cfg["noise_sigma"]))
    except ValueError as exc:
        raise InputDataError(f"config: {exc}") from None
    qmap = QpLambdaMap(**cfg["qp_lambda_map"])
    if qmap != seq.qp_map:
        seq = SyntheticSequence(seq.geometry, seq.frames, seq.scene_changes, seq.noise_sigma,
                                seq.seed, seq.level_efficiency, qmap)
    return seq


# -- output ---------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def prepare_output_dir(path: str | os.PathLike, force: bool) -> Path:
    out = Path(path)
    if out.exists():
        if not out.is_dir():
            raise UsageError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not force:
            raise UsageError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _manifest(command: str, cfg: dict, **extra) -> dict:
    return {"tool": "rdlambda", "version": __version__, "command": command,
            "config": cfg, **extra}


# -- fit ------------------------------------------------------------------------

def parse_ranges(text: str) -> list[tuple[int, int]]:
    ranges = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError:
            raise UsageError(f"bad QP range {part!r}; expected LO-HI") from None
        if not sep or lo_i > hi_i:
            raise UsageError(f"bad QP range {part!r}; expected LO-HI")
        ranges.append((lo_i, hi_i))
    return ranges


def cmd_fit(args) -> int:
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise InputDataError(f"cannot read {args.input}: {exc.strerror}") from None
    try:
        samples = read_samples_csv(text)
    except MalformedInputError as exc:
        raise InputDataError(f"{args.input}: {exc}") from None
    ranges = parse_ranges(args.ranges) if args.ranges else list(DEFAULT_QP_RANGES)
    out = report_to_csv(fit_report(samples, ranges))
    if args.output:
        write_atomic(Path(args.output), out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


# -- simulate -------------------------------------------------------------------

def _simulate(cfg: dict, mode: str, target_bitrate: float):
    name, _ = parse_mode(mode)
    seq = _sequence(cfg)
    records, summary = run(_controller_config(cfg, target_bitrate), seq, mode)
    if len(records) != len(seq) or any(not 0 <= r.qp_final <= 51 for r in records):
        raise InvariantError("controller output does not cover the sequence with legal QPs")
    if name == "ABR":
        summary["qp_window_violations"] = qp_window_violations(records)
    return records, summary


def _mode_arg(text: str) -> str:
    try:
        name, qp = parse_mode(text)
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return name if qp is None else f"{name}:{qp}"


def cmd_simulate(args) -> int:
    mode = _mode_arg(args.mode)
    cfg = load_config(args.config)
    if args.target_bitrate is not None:
        cfg["target_bitrate"] = args.target_bitrate
        _controller_config(cfg, args.target_bitrate)
    out = prepare_output_dir(args.output, args.force)
    return _simulate_into(out, cfg, mode)


def _simulate_into(out: Path, cfg: dict, mode: str) -> int:
    records, summary = _simulate(cfg, mode, cfg["target_bitrate"])
    write_atomic(out / "frames.csv", frame_log_csv(records))
    write_atomic(out / "summary.json", summary_json(summary))
    write_atomic(out / MANIFEST_NAME, _dump(_manifest("simulate", cfg, mode=mode)))
    log.info("simulate %s: %d frames, %.1f bit/s", mode, summary["frames"], summary["bitrate"])
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

def _sweep_leg(cfg: dict, qp: int) -> dict:
    cqp_records, cqp = _simulate(cfg, f"CQP:{qp}", cfg["target_bitrate"])
    abr_records, abr = _simulate(cfg, "ABR", cqp["bitrate"])
    return {
        "qp": qp,
        "cqp_log": frame_log_csv(cqp_records),
        "abr_log": frame_log_csv(abr_records),
        "cqp": cqp,
        "abr": abr,
    }


def _parse_qps(values) -> list[int]:
    qps = list(values) if values else list(DEFAULT_SWEEP_QPS)
    if len(qps) < 4:
        raise UsageError("sweep needs at least 4 QPs for the BD-rate fit")
    if len(set(qps)) != len(qps):
        raise UsageError("sweep QPs must be distinct")
    if any(not 0 <= q <= 51 for q in qps):
        raise UsageError("sweep QPs must be in [0, 51]")
    return qps


def cmd_sweep(args) -> int:
    qps = _parse_qps(args.qps)
    cfg = load_config(args.config)
    out = prepare_output_dir(args.output, args.force)
    return _sweep_into(out, cfg, qps, args.jobs)


def _sweep_into(out: Path, cfg: dict, qps: list[int], jobs: int = 1) -> int:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            legs = list(pool.map(_sweep_leg, [cfg] * len(qps), qps))
    else:
        legs = [_sweep_leg(cfg, qp) for qp in qps]
    anchor, test, rows = [], [], []
    for leg in legs:
        qp, cqp, abr = leg["qp"], leg["cqp"], leg["abr"]
        write_atomic(out / f"cqp_{qp}.csv", leg["cqp_log"])
        write_atomic(out / f"abr_{qp}.csv", leg["abr_log"])
        anchor.append(RdPoint(cqp["bitrate"], cqp["mean_psnr_db"]))
        test.append(RdPoint(abr["bitrate"], abr["mean_psnr_db"]))
        rows.append({
            "qp": qp,
            "cqp_bitrate": cqp["bitrate"],
            "cqp_psnr_db": cqp["mean_psnr_db"],
            "abr_bitrate": abr["bitrate"],
            "abr_psnr_db": abr["mean_psnr_db"],
            "delta_r_percent": delta_r(abr["bitrate"], cqp["bitrate"]),
            "qp_window_violations": abr["qp_window_violations"],
        })
    try:
        bd = bd_rate(anchor, test)
    except ValueError as exc:
        log.warning("BD-rate unavailable: %s", exc)
        bd = None
    comparison = {
        "kind": cfg["kind"],
        "qps": qps,
        "points": rows,
        "bd_rate_percent": bd,
        "mean_delta_r_percent": sum(r["delta_r_percent"] for r in rows) / len(rows),
    }
    write_atomic(out / "comparison.json", _dump(comparison))
    write_atomic(out / MANIFEST_NAME, _dump(_manifest("sweep", cfg, qps=qps)))
    log.info("sweep %s: BD-rate %s", cfg["kind"], bd)
    return EXIT_OK


# -- replay ---------------------------------------------------------------------

def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except OSError as exc:
        raise InputDataError(f"cannot read {args.manifest}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputDataError(f"{args.manifest}: invalid JSON: {exc.msg}") from None
    if not isinstance(manifest, dict) or manifest.get("tool") != "rdlambda":
        raise InputDataError(f"{args.manifest} is not an rdlambda manifest")
    cfg = normalize_config(manifest.get("config", {}))
    out = prepare_output_dir(args.output, args.force)
    command = manifest.get("command")
    if command == "simulate":
        return _simulate_into(out, cfg, _mode_arg(manifest.get("mode", "")))
    if command == "sweep":
        return _sweep_into(out, cfg, _parse_qps(manifest.get("qps")), args.jobs)
    raise InputDataError(f"manifest command {command!r} cannot be replayed")


# -- bdrate ---------------------------------------------------------------------

def read_rd_points(path: str) -> list[RdPoint]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputDataError(f"{path}: empty input")
    header = [h.strip().lower() for h in rows[0]]
    if header != ["bitrate", "psnr_db"]:
        raise InputDataError(f"{path}: line 1: expected header bitrate,psnr_db")
    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        try:
            if len(row) != 2:
                raise ValueError(f"expected 2 fields, got {len(row)}")
            points.append(RdPoint(float(row[0]), float(row[1])))
        except ValueError as exc:
            raise InputDataError(f"{path}: line {lineno}: {exc}") from None
    return points


def cmd_bdrate(args) -> int:
    anchor, test = read_rd_points(args.anchor), read_rd_points(args.test)
    try:
        value = bd_rate(anchor, test, method=args.method)
    except ValueError as exc:
        raise InputDataError(str(exc)) from None
    print(repr(value))
    return EXIT_OK


# -- structures -----------------------------------------------------------------

def cmd_structures(args) -> int:
    kinds = [StructureKind(args.kind)] if args.kind else list(StructureKind)
    print(_dump({k.value: build_structure(k).to_dict() for k in kinds}), end="")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdlambda", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit classic and offset R-D models to qp,bpp,mse samples")
    f.add_argument("input")
    f.add_argument("--ranges", help="comma-separated QP ranges, e.g. 4-51,17-37")
    f.add_argument("-o", "--output", help="report CSV (default: stdout)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run one CQP or ABR simulation")
    s.add_argument("config")
    s.add_argument("--mode", default="ABR", help="ABR or CQP:<qp>")
    s.add_argument("--target-bitrate", type=float, help="override the config target (bit/s)")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="CQP at each QP, then ABR at each CQP rate")
    w.add_argument("config")
    w.add_argument("--qps", type=int, nargs="+")
    w.add_argument("-o", "--output", required=True)
    w.add_argument("--force", action="store_true")
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--force", action="store_true")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_replay)

    b = sub.add_parser("bdrate", help="BD-rate of TEST against ANCHOR (bitrate,psnr_db CSVs)")
    b.add_argument("anchor")
    b.add_argument("test")
    b.add_argument("--method", choices=("cubic", "pchip"), default="cubic")
    b.set_defaults(func=cmd_bdrate)

    t = sub.add_parser("structures", help="print the GOP structure tables as JSON")
    t.add_argument("--kind", choices=[k.value for k in StructureKind])
    t.set_defaults(func=cmd_structures)
    return p


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"rdlambda: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputDataError as exc:
        print(f"rdlambda: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as exc:
        print(f"rdlambda: internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
