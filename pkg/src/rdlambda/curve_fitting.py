"""Least-squares fits of the classic and the offset power-law R-D models.

classic:   D = C * R ** -K
proposed:  D = C * (R + B) ** -K - T

Both fits minimize squared error on the MSE scale with Nelder-Mead over
log-parameters (keeps every parameter positive). The classic fit starts from
a log-log linear regression; the proposed fit starts from that plus small
offsets B and T, keeping the best of a few starting offsets.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels

MAX_ITERATIONS = 2000
REL_TOL = 1e-10
MAX_RESTARTS = 4
# (B, T) starting points as multiples of the smallest rate and distortion
PROPOSED_STARTS = ((0.05, 0.5), (1.0, 0.5), (0.05, 0.05))

DEFAULT_QP_RANGES = ((4, 51), (4, 22), (17, 37), (32, 51))
REPORT_COLUMNS = ("range", "model", "C", "K", "B", "T", "r2", "rmse", "converged")


class DegenerateDataError(ValueError):
    """The samples cannot determine the model."""


class MalformedInputError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RdSample:
    qp: int
    bpp: float
    mse: float

    def __post_init__(self):
        if not self.bpp > 0:
            raise ValueError(f"bpp must be > 0, got {self.bpp}")
        if not self.mse >= 0:
            raise ValueError(f"mse must be >= 0, got {self.mse}")


@dataclass(frozen=True)
class FitResult:
    model_kind: str  # "classic" or "proposed"
    params: tuple[float, ...]
    r_squared: float
    rmse: float
    converged: bool
    iterations: int

    @property
    def c(self) -> float:
        return self.params[0]

    @property
    def k(self) -> float:
        return self.params[1]

    @property
    def b(self) -> float:
        return self.params[2] if self.model_kind == "proposed" else 0.0

    @property
    def t(self) -> float:
        return self.params[3] if self.model_kind == "proposed" else 0.0

    def predict(self, bpp) -> np.ndarray:
        bpp = np.asarray(bpp, dtype=np.float64)
        if self.model_kind == "classic":
            return self.c * bpp ** (-self.k)
        return self.c * (bpp + self.b) ** (-self.k) - self.t


def goodness(observed: Sequence[float], predicted: Sequence[float]) -> tuple[float, float]:
    """(r^2, RMSE) of ``predicted`` against ``observed``."""
    y = np.asarray(observed, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if y.shape != p.shape or y.size < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    ss_res = float(np.sum((y - p) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise DegenerateDataError("observed values are constant")
    return 1.0 - ss_res / ss_tot, math.sqrt(ss_res / y.size)


def _arrays(samples: Sequence[RdSample], min_points: int):
    if len(samples) < min_points:
        raise DegenerateDataError(f"need at least {min_points} samples, got {len(samples)}")
    bpp = np.array([s.bpp for s in samples], dtype=np.float64)
    mse = np.array([s.mse for s in samples], dtype=np.float64)
    if np.all(mse == mse[0]):
        raise DegenerateDataError("all mse values are equal")
    if np.unique(bpp).size < min_points:
        raise DegenerateDataError("not enough distinct bpp values")
    return bpp, mse


def _loglinear_init(bpp, mse):
    """(C, K) from a straight-line fit of ln(mse) against ln(bpp)."""
    pos = mse > 0
    if pos.sum() < 2:
        return float(np.mean(mse) * np.mean(bpp)), 1.0
    slope, intercept = np.polyfit(np.log(bpp[pos]), np.log(mse[pos]), 1)
    k = -slope if slope < 0 else 1.0
    return float(math.exp(intercept)), float(min(max(k, 1e-3), 10.0))


def _simplex(objective, x0, bpp, mse):
    """Nelder-Mead with restarts from the incumbent until it stops improving."""
    fatol = REL_TOL * max(float(np.dot(mse, mse)), 1e-300)
    x = np.asarray(x0, dtype=np.float64)
    fx = objective(x, bpp, mse)
    total_iter = 0
    converged = False
    for _ in range(MAX_RESTARTS):
        budget = MAX_ITERATIONS - total_iter
        if budget <= 0:
            break
        res = minimize(
            objective, x, args=(bpp, mse), method="Nelder-Mead",
            options={"maxiter": budget, "maxfev": 2 * budget, "xatol": REL_TOL,
                     "fatol": fatol, "adaptive": x.size > 2},
        )
        total_iter += int(res.nit)
        converged = bool(res.success)
        improved = res.fun < fx - fatol
        if res.fun <= fx:
            x, fx = res.x, float(res.fun)
        if not improved:
            break
    return x, total_iter, converged


def fit_classic(samples: Sequence[RdSample]) -> FitResult:
    bpp, mse = _arrays(samples, 3)
    c0, k0 = _loglinear_init(bpp, mse)
    x, nit, ok = _simplex(kernels.sse_classic, [math.log(c0), math.log(k0)], bpp, mse)
    params = (math.exp(x[0]), math.exp(x[1]))
    pred = params[0] * bpp ** (-params[1])
    r2, rmse = goodness(mse, pred)
    return FitResult("classic", params, r2, rmse, ok, nit)


def fit_proposed(samples: Sequence[RdSample]) -> FitResult:
    bpp, mse = _arrays(samples, 5)
    c0, k0 = _loglinear_init(bpp, mse)
    r_min = float(bpp.min())
    d_min = float(mse[mse > 0].min())
    best = None
    nit = 0
    for b0, t0 in PROPOSED_STARTS:
        x0 = [math.log(c0), math.log(k0), math.log(b0 * r_min), math.log(t0 * d_min)]
        x, n, ok = _simplex(kernels.sse_proposed, x0, bpp, mse)
        nit += n
        sse = kernels.sse_proposed(x, bpp, mse)
        if best is None or sse < best[0]:
            best = (sse, x, ok)
    _, x, ok = best
    c, k, b, t = (math.exp(v) for v in x)
    pred = c * (bpp + b) ** (-k) - t
    r2, rmse = goodness(mse, pred)
    return FitResult("proposed", (c, k, b, t), r2, rmse, ok, nit)


# -- reporting ----------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    qp_range: tuple[int, int]
    model: str
    result: FitResult | None
    note: str = ""

    @property
    def label(self) -> str:
        return f"{self.qp_range[0]}-{self.qp_range[1]}"

    def as_csv_row(self) -> list[str]:
        if self.result is None:
            return [self.label, self.model, "", "", "", "", "", "", self.note]
        r = self.result
        b = repr(r.b) if r.model_kind == "proposed" else ""
        t = repr(r.t) if r.model_kind == "proposed" else ""
        return [self.label, self.model, repr(r.c), repr(r.k), b, t,
                repr(r.r_squared), repr(r.rmse), str(r.converged).lower()]


def fit_report(samples: Sequence[RdSample],
               qp_ranges: Iterable[tuple[int, int]] = DEFAULT_QP_RANGES) -> list[ReportRow]:
    """Fit both models on each QP sub-range. Failures become inline notes."""
    rows = []
    for lo, hi in qp_ranges:
        subset = [s for s in samples if lo <= s.qp <= hi]
        for kind, fit in (("classic", fit_classic), ("proposed", fit_proposed)):
            if len(subset) < 5:
                rows.append(ReportRow((lo, hi), kind, None, "insufficient data"))
                continue
            try:
                rows.append(ReportRow((lo, hi), kind, fit(subset)))
            except DegenerateDataError as exc:
                rows.append(ReportRow((lo, hi), kind, None, f"degenerate data: {exc}"))
    return rows


def report_to_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv_row())
    return buf.getvalue()


def read_samples_csv(text: str) -> list[RdSample]:
    """Parse ``qp,bpp,mse`` CSV text (header required)."""
    lines = text.splitlines()
    if not lines or not any(line.strip() for line in lines):
        raise MalformedInputError("empty input")
    reader = csv.reader(lines)
    header = [h.strip().lower() for h in next(reader)]
    if header != ["qp", "bpp", "mse"]:
        raise MalformedInputError(f"expected header qp,bpp,mse, got {','.join(header)}", 1)
    samples = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise MalformedInputError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            samples.append(RdSample(int(row[0]), float(row[1]), float(row[2])))
        except ValueError as exc:
            raise MalformedInputError(str(exc), lineno) from None
    if not samples:
        raise MalformedInputError("no data rows")
    return samples


def samples_to_csv(samples: Sequence[RdSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("qp", "bpp", "mse"))
    for s in samples:
        writer.writerow((s.qp, repr(s.bpp), repr(s.mse)))
    return buf.getvalue()
