"""Synthetic scenarios, the edge-count baseline, and power-study drivers.

The drivers reproduce the detection-power protocols: per grid cell, calibrate
on fresh no-change data, then score a batch of samples that carry a change
with probability one half.  Results are confusion-matrix reports with the
power summarized as the geometric mean of accuracy and sensitivity.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import logging
import math

import numpy as np

from . import _kernels
from .calibrate import (
    CalibrationMode,
    _draw_perms,
    calibrate,
    lower_quantile_threshold,
)
from .core import (
    ConfigError,
    GraphKind,
    ObservationError,
    WindowConfig,
    as_block,
    seeded_rng,
)
from .detect import OnlineDetector, Outcome, static_detect
from .ratios import scan_ratios

logger = logging.getLogger(__name__)

REPORT_FORMAT = "gsrdetect-report"
REPORT_VERSION = 1

# sub-stream domains for the simulation drivers
_DOM_STATIC_TRAIN = 21
_DOM_STATIC_TRIAL = 22
_DOM_ONLINE_TRAIN = 23
_DOM_ONLINE_SAMPLE = 24

DEFAULT_VARIANCE_SCALE = 2.0


def default_mean_delta(dimension: int) -> float:
    """Per-coordinate shift used by the mean-change grids: d^(-1/3)."""
    return float(dimension) ** (-1.0 / 3.0)


class ChangeKind(str, enum.Enum):
    NONE = "none"
    MEAN = "mean"
    VARIANCE = "variance"


@dataclasses.dataclass(frozen=True)
class Scenario:
    """One synthetic stream: standard normal, optionally switching at a point.

    Before ``change_at`` draws are N(0, I_d); from it onward they are
    N(delta * 1, I_d) for a mean change or N(0, scale * I_d) for a variance
    change.
    """

    dimension: int
    length: int
    kind: ChangeKind = ChangeKind.NONE
    change_at: int | None = None
    magnitude: float = 0.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dimension}")
        if self.length < 1:
            raise ConfigError(f"length must be >= 1, got {self.length}")
        if self.kind is not ChangeKind.NONE:
            if self.change_at is None or not 0 < self.change_at < self.length:
                raise ConfigError(
                    f"change_at must lie inside the stream, got {self.change_at}"
                )
            if self.kind is ChangeKind.VARIANCE and self.magnitude <= 0:
                raise ConfigError("variance scale must be positive")

    @classmethod
    def null(cls, dimension: int, length: int) -> "Scenario":
        return cls(dimension, length)

    @classmethod
    def mean_shift(
        cls, dimension: int, length: int, change_at: int, delta: float | None = None
    ) -> "Scenario":
        if delta is None:
            delta = default_mean_delta(dimension)
        return cls(dimension, length, ChangeKind.MEAN, change_at, float(delta))

    @classmethod
    def variance_shift(
        cls, dimension: int, length: int, change_at: int, scale: float = DEFAULT_VARIANCE_SCALE
    ) -> "Scenario":
        return cls(dimension, length, ChangeKind.VARIANCE, change_at, float(scale))


def generate(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Draw one stream for the scenario as a (length, dimension) array."""
    data = rng.standard_normal((scenario.length, scenario.dimension))
    if scenario.kind is ChangeKind.MEAN:
        data[scenario.change_at :] += scenario.magnitude
    elif scenario.kind is ChangeKind.VARIANCE:
        data[scenario.change_at :] *= math.sqrt(scenario.magnitude)
    return data


# ---------------------------------------------------------------------------
# in-between-group edge counting baseline
# ---------------------------------------------------------------------------

def ibgec_statistic(block) -> int:
    """Count of MST edges straddling the midpoint split of a block.

    Few straddling edges evidence a change, so the permutation test for this
    baseline rejects in the lower tail.
    """
    x = as_block(block)
    n = x.shape[0]
    if n < 4 or n % 2:
        raise ObservationError(f"window length must be even and >= 4, got {n}")
    D = _kernels.pairwise_sq_dists(x)
    return int(_kernels.straddle_count_np(D, n // 2))


def ibgec_null(training, n: int, k: int, seed: int) -> np.ndarray:
    """Sorted permutation null of the straddle count, first-n of each draw.

    Uses the same per-index permutation sub-streams as the ratio calibration
    so baselines and detectors see identical reorderings.
    """
    x = as_block(training)
    if x.shape[0] < n:
        raise ObservationError(f"training length {x.shape[0]} is below window length {n}")
    xc = np.ascontiguousarray(x - x.mean(axis=0))
    D = _kernels.pairwise_sq_dists(xc)
    perms = _draw_perms(seed, np.arange(k), x.shape[0], 0)
    counts = _kernels.ibgec_null_static(D, n, perms)
    return np.sort(np.asarray(counts))


# ---------------------------------------------------------------------------
# confusion-matrix reports
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class PowerReport:
    """Confusion counts with derived metrics; undefined cells stay None."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def record(self, truth: bool, decision: bool) -> None:
        if truth and decision:
            self.tp += 1
        elif truth and not decision:
            self.fn += 1
        elif decision:
            self.fp += 1
        else:
            self.tn += 1

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float | None:
        return (self.tp + self.tn) / self.total if self.total else None

    @property
    def sensitivity(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def fpr(self) -> float | None:
        neg = self.fp + self.tn
        return self.fp / neg if neg else None

    @property
    def p_mean(self) -> float | None:
        acc, sens = self.accuracy, self.sensitivity
        if acc is None or sens is None:
            return None
        return math.sqrt(acc * sens)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "fpr": self.fpr,
            "p_mean": self.p_mean,
        }


class Method(str, enum.Enum):
    SGSR_CG = "sGSR_CG"
    SGSR_MST = "sGSR_MST"
    IBGEC = "IBGEC"
    OGSR_CG = "oGSR_CG"
    OGSR_MST = "oGSR_MST"


_METHOD_KIND = {
    Method.SGSR_CG: GraphKind.COMPLETE,
    Method.SGSR_MST: GraphKind.MST,
    Method.OGSR_CG: GraphKind.COMPLETE,
    Method.OGSR_MST: GraphKind.MST,
}

STATIC_METHODS = (Method.SGSR_CG, Method.SGSR_MST, Method.IBGEC)
ONLINE_METHODS = (Method.OGSR_CG, Method.OGSR_MST)


@dataclasses.dataclass(frozen=True)
class PowerCell:
    """One grid cell of a power study."""

    dimension: int
    window: tuple[int, ...]
    method: Method
    change: ChangeKind
    report: PowerReport

    def to_dict(self) -> dict:
        out = {
            "d": self.dimension,
            "n": "+".join(str(n) for n in self.window),
            "method": self.method.value,
            "change": self.change.value,
        }
        out.update(self.report.to_dict())
        return out


def _scenario_for(change: ChangeKind, d: int, length: int, change_at: int) -> Scenario:
    if change is ChangeKind.MEAN:
        return Scenario.mean_shift(d, length, change_at)
    if change is ChangeKind.VARIANCE:
        return Scenario.variance_shift(d, length, change_at)
    raise ConfigError("power studies need a mean or variance change kind")


def run_static_power(
    dimensions,
    lengths,
    change: ChangeKind,
    trials: int = 200,
    methods=STATIC_METHODS,
    alpha: float = 0.05,
    seed: int = 0,
    permutations: int = 500,
    training_factor: int = 4,
    min_training: int = 160,
) -> list[PowerCell]:
    """Single-window detection power over a (dimension, window-length) grid.

    Per cell: calibrate each method on a fresh no-change training sample,
    then score ``trials`` samples of exactly the window length, each carrying
    a change at its midpoint with probability one half.  All methods in a
    cell see the same samples.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    change = ChangeKind(change)
    methods = tuple(Method(m) for m in methods)
    cells = []
    for d in dimensions:
        for n in lengths:
            n_train = max(training_factor * n, min_training)
            train = seeded_rng(seed, (_DOM_STATIC_TRAIN, d, n)).standard_normal((n_train, d))
            tables = {}
            for method in methods:
                if method is Method.IBGEC:
                    counts = ibgec_null(train, n, permutations, seed)
                    tables[method] = lower_quantile_threshold(counts, alpha)
                else:
                    cfg = WindowConfig(
                        lengths=(n,),
                        alpha=alpha,
                        permutations=permutations,
                        graph_kind=_METHOD_KIND[method],
                        seed=seed,
                    )
                    tables[method] = calibrate(train, cfg, CalibrationMode.STATIC)
            reports = {method: PowerReport() for method in methods}
            scenario = _scenario_for(change, d, n, n // 2)
            for t in range(trials):
                rng = seeded_rng(seed, (_DOM_STATIC_TRIAL, d, n, t))
                changed = bool(rng.random() < 0.5)
                block = generate(scenario if changed else Scenario.null(d, n), rng)
                for method in methods:
                    if method is Method.IBGEC:
                        decision = ibgec_statistic(block) <= tables[method]
                    else:
                        outcome = static_detect(block, tables[method]).outcome
                        decision = outcome is Outcome.REJECT
                    reports[method].record(changed, decision)
            for method in methods:
                cells.append(PowerCell(d, (n,), method, change, reports[method]))
            logger.info("static power cell d=%d n=%d done", d, n)
    return cells


def run_online_power(
    dimensions,
    windows=(40, 70, 100),
    change: ChangeKind = ChangeKind.MEAN,
    samples: int = 200,
    methods=ONLINE_METHODS,
    alpha: float = 0.10,
    seed: int = 0,
    permutations: int = 500,
    training_size: int = 150,
    sample_length: int = 100,
) -> list[PowerCell]:
    """Streaming detection power with multiple scanning windows.

    Per dimension and method, the detector trains once on a fresh no-change
    stream of ``training_size`` observations; each scored sample then streams
    ``sample_length`` observations through a monitoring-only detector sharing
    that calibration.  A sample counts as detected when any window fires
    while it streams.  Change samples switch distribution at the midpoint.
    """
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    change = ChangeKind(change)
    methods = tuple(Method(m) for m in methods)
    windows = tuple(int(n) for n in windows)
    cells = []
    for d in dimensions:
        train = seeded_rng(seed, (_DOM_ONLINE_TRAIN, d)).standard_normal((training_size, d))
        scenario = _scenario_for(change, d, sample_length, sample_length // 2)
        for method in methods:
            cfg = WindowConfig(
                lengths=windows,
                alpha=alpha,
                permutations=permutations,
                graph_kind=_METHOD_KIND[method],
                seed=seed,
            )
            table = calibrate(train, cfg, CalibrationMode.ONLINE)
            report = PowerReport()
            for s in range(samples):
                rng = seeded_rng(seed, (_DOM_ONLINE_SAMPLE, d, s))
                changed = bool(rng.random() < 0.5)
                data = generate(scenario if changed else Scenario.null(d, sample_length), rng)
                detector = OnlineDetector.from_calibration(table)
                event = None
                for row in data:
                    event = detector.push(row)
                    if event is not None:
                        break
                report.record(changed, event is not None)
            cells.append(PowerCell(d, windows, method, change, report))
            logger.info(
                "online power d=%d method=%s: p_mean=%s fpr=%s",
                d, method.value, report.p_mean, report.fpr,
            )
    return cells


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------

_CSV_COLUMNS = (
    "d", "n", "method", "change",
    "tp", "fp", "tn", "fn",
    "accuracy", "sensitivity", "fpr", "p_mean",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def render_power_csv(cells, meta: dict) -> str:
    """Long-format CSV with the resolved run metadata embedded as comments."""
    buf = io.StringIO()
    buf.write(f"# {REPORT_FORMAT} v{REPORT_VERSION}\n")
    buf.write(f"# meta: {json.dumps(meta, sort_keys=True, separators=(',', ':'))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for cell in cells:
        row = cell.to_dict()
        writer.writerow([_fmt(row[col]) for col in _CSV_COLUMNS])
    return buf.getvalue()


def write_power_csv(cells, path, meta: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_power_csv(cells, meta))


def write_power_json(cells, path, meta: dict) -> None:
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "meta": meta,
        "cells": [cell.to_dict() for cell in cells],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
