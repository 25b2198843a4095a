"""Static and online change-point detectors.

The static detector tests one block against pre-computed thresholds.  The
online detector ingests a stream: it first accumulates a training sample and
calibrates itself, then monitors trailing windows of every configured length,
emitting a detection event the moment any window's statistic reaches its
threshold.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
from typing import Callable

import numpy as np

from . import _kernels, ratios
from .calibrate import CalibrationMode, CalibrationTable, calibrate
from .core import (
    CalibrationMismatchError,
    DegenerateWindowError,
    DetectionEvent,
    DetectorStateError,
    GraphKind,
    ObservationError,
    Statistic,
    WindowConfig,
    as_block,
    as_observation,
)

logger = logging.getLogger(__name__)

STATE_FORMAT = "gsrdetect-detector-state"
STATE_VERSION = 1


class Outcome(str, enum.Enum):
    REJECT = "reject"
    ACCEPT = "accept"
    NO_DECISION = "no_decision"


class DetectorStatus(str, enum.Enum):
    TRAINING = "training"
    MONITORING = "monitoring"
    TRIGGERED = "triggered"


@dataclasses.dataclass(frozen=True)
class StaticDecision:
    """Outcome of testing one block, with the values and thresholds used."""

    outcome: Outcome
    window_length: int
    mean_ratio: float | None
    variance_ratio: float | None
    mean_threshold: float
    variance_threshold: float
    triggered: tuple[Statistic, ...] = ()

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "window_length": self.window_length,
            "mean_ratio": self.mean_ratio,
            "variance_ratio": self.variance_ratio,
            "mean_threshold": self.mean_threshold,
            "variance_threshold": self.variance_threshold,
            "triggered": [s.value for s in self.triggered],
        }


def static_detect(
    block, calibration: CalibrationTable, kind: GraphKind | None = None
) -> StaticDecision:
    """Test a block of one calibrated window length at its midpoint split.

    The no-change hypothesis is rejected when either statistic meets or
    exceeds its threshold (the comparison is inclusive).  A degenerate block
    yields NO_DECISION rather than an accept or reject.
    """
    if calibration.mode is not CalibrationMode.STATIC:
        raise CalibrationMismatchError("static detection needs a static-mode calibration")
    kind = calibration.graph_kind if kind is None else GraphKind(kind)
    if kind is not calibration.graph_kind:
        raise CalibrationMismatchError(
            f"calibration was built for {calibration.graph_kind.value} graphs, not {kind.value}"
        )
    x = as_block(block)
    if x.shape[1] != calibration.dimension:
        raise CalibrationMismatchError(
            f"block dimension {x.shape[1]} does not match the calibrated dimension "
            f"{calibration.dimension}"
        )
    n = x.shape[0]
    if n not in calibration.lengths:
        raise CalibrationMismatchError(
            f"block length {n} is not among the calibrated windows {calibration.lengths}"
        )
    rho_mu = calibration.threshold(n, Statistic.MEAN)
    rho_sig = calibration.threshold(n, Statistic.VARIANCE)
    try:
        stats = ratios.scan_ratios(x, kind)
    except DegenerateWindowError:
        logger.warning("degenerate window of length %d: no decision", n)
        return StaticDecision(Outcome.NO_DECISION, n, None, None, rho_mu, rho_sig)
    triggered = []
    if stats.mean_ratio >= rho_mu:
        triggered.append(Statistic.MEAN)
    if stats.variance_ratio >= rho_sig:
        triggered.append(Statistic.VARIANCE)
    outcome = Outcome.REJECT if triggered else Outcome.ACCEPT
    return StaticDecision(
        outcome=outcome,
        window_length=n,
        mean_ratio=stats.mean_ratio,
        variance_ratio=stats.variance_ratio,
        mean_threshold=rho_mu,
        variance_threshold=rho_sig,
        triggered=tuple(triggered),
    )


class OnlineDetector:
    """Streaming multi-window detector with push-one / poll-status semantics.

    Construct with a configuration and a training size to calibrate from the
    first ``training_size`` observations, or with
    :meth:`from_calibration` to start monitoring immediately.  Events go to
    the optional ``sink`` callable as well as being returned from
    :meth:`push`.  After an event the detector stays triggered until
    :meth:`reset`, which clears the window buffer but keeps the calibration.
    """

    def __init__(
        self,
        config: WindowConfig,
        training_size: int,
        sink: Callable[[DetectionEvent], None] | None = None,
    ):
        if training_size < max(config.lengths):
            raise ObservationError(
                f"training size {training_size} is below the largest window "
                f"{max(config.lengths)}"
            )
        self.config = config
        self.training_size = int(training_size)
        self.sink = sink
        self.calibration: CalibrationTable | None = None
        self._status = DetectorStatus.TRAINING
        self._training_rows: list[np.ndarray] = []
        self._dim: int | None = None
        self._stream_index = -1
        self._since_training = 0
        self._capacity = max(config.lengths)
        self._buffer: np.ndarray | None = None
        self._count = 0
        self._dists: np.ndarray | None = None
        self.last_event: DetectionEvent | None = None

    @classmethod
    def from_calibration(
        cls,
        calibration: CalibrationTable,
        sink: Callable[[DetectionEvent], None] | None = None,
    ) -> "OnlineDetector":
        if calibration.mode is not CalibrationMode.ONLINE:
            raise CalibrationMismatchError("online detection needs an online-mode calibration")
        det = cls(calibration.config, calibration.training_size, sink)
        det.calibration = calibration
        det._dim = calibration.dimension
        det._status = DetectorStatus.MONITORING
        det._init_buffers()
        return det

    @property
    def status(self) -> DetectorStatus:
        return self._status

    @property
    def stream_index(self) -> int:
        """Index of the last ingested observation, -1 before the first."""
        return self._stream_index

    def _init_buffers(self) -> None:
        self._buffer = np.zeros((self._capacity, self._dim))
        self._count = 0
        if self.config.graph_kind is GraphKind.MST:
            self._dists = np.zeros((self._capacity, self._capacity))

    def push(self, observation) -> DetectionEvent | None:
        """Ingest one observation; returns an event on detection."""
        if self._status is DetectorStatus.TRIGGERED:
            raise DetectorStateError("detector is triggered; call reset() to resume")
        obs = as_observation(observation, dim=self._dim, where=f"at stream index {self._stream_index + 1}")
        if self._dim is None:
            self._dim = obs.size
        self._stream_index += 1
        if self._status is DetectorStatus.TRAINING:
            self._training_rows.append(obs)
            if len(self._training_rows) >= self.training_size:
                self._finish_training()
            return None
        return self._step(obs)

    def _finish_training(self) -> None:
        training = np.asarray(self._training_rows)
        self.calibration = calibrate(training, self.config, CalibrationMode.ONLINE)
        self._training_rows = []
        self._status = DetectorStatus.MONITORING
        self._init_buffers()
        logger.info(
            "training complete at stream index %d: alpha_star=%.6g",
            self._stream_index,
            self.calibration.alpha_star,
        )

    def _append(self, obs: np.ndarray) -> None:
        if self._count == self._capacity:
            self._buffer[:-1] = self._buffer[1:]
            self._buffer[-1] = obs
            if self._dists is not None:
                self._dists[:-1, :-1] = self._dists[1:, 1:]
        else:
            self._buffer[self._count] = obs
            self._count += 1
        if self._dists is not None:
            c = self._count
            diff = self._buffer[:c] - obs
            row = np.einsum("ij,ij->i", diff, diff)
            self._dists[c - 1, :c] = row
            self._dists[:c, c - 1] = row

    def _window_stats(self, n: int) -> tuple[float, float] | None:
        lo = self._count - n
        if self.config.graph_kind is GraphKind.COMPLETE:
            try:
                stats = ratios.scan_ratios(self._buffer[lo : self._count], GraphKind.COMPLETE)
            except DegenerateWindowError:
                return None
            return stats.mean_ratio, stats.variance_ratio
        h = n // 2
        D = self._dists[lo : self._count, lo : self._count]
        dg1 = _kernels.prim_span(np.ascontiguousarray(D[:h, :h]))
        dg2 = _kernels.prim_span(np.ascontiguousarray(D[h:, h:]))
        if dg1 <= 0.0 or dg2 <= 0.0:
            return None
        dg = _kernels.prim_span(np.ascontiguousarray(D))
        diff = dg1 - dg2
        return dg / (dg1 + dg2), 2.0 + diff * diff / (dg1 * dg2)

    def _step(self, obs: np.ndarray) -> DetectionEvent | None:
        self._append(obs)
        self._since_training += 1
        if self._since_training % self.config.stride:
            return None
        exceedances: list[tuple[int, Statistic, float, float]] = []
        for n in sorted(self.config.lengths, reverse=True):
            if n > self._since_training:
                continue
            stats = self._window_stats(n)
            if stats is None:
                logger.debug("degenerate window of length %d at index %d", n, self._stream_index)
                continue
            for stat, value in zip(Statistic, stats):
                thr = self.calibration.threshold(n, stat)
                if value >= thr:
                    exceedances.append((n, stat, value, thr))
        if not exceedances:
            return None
        for n, stat, value, thr in exceedances:
            logger.info(
                "window %d %s ratio %.6g >= threshold %.6g at index %d",
                n, stat.value, value, thr, self._stream_index,
            )
        # smallest window localizes tightest; mean ratio wins an intra-window tie
        n, stat, value, thr = min(
            exceedances, key=lambda e: (e[0], 0 if e[1] is Statistic.MEAN else 1)
        )
        event = DetectionEvent(
            stream_index=self._stream_index,
            window_length=n,
            statistic=stat,
            value=value,
            threshold=thr,
            estimated_change_point=self._stream_index - n // 2,
        )
        self._status = DetectorStatus.TRIGGERED
        self.last_event = event
        if self.sink is not None:
            self.sink(event)
        return event

    def reset(self) -> None:
        """Clear the window buffer and resume monitoring after a detection."""
        if self._status is not DetectorStatus.TRIGGERED:
            raise DetectorStateError(f"reset is only valid when triggered, not {self._status.value}")
        self._count = 0
        self._since_training = 0
        self._status = DetectorStatus.MONITORING

    # -- checkpoint / restore -------------------------------------------------

    def state_json(self) -> dict:
        """Serializable snapshot; distances are derived state and not stored."""
        state = {
            "format": STATE_FORMAT,
            "version": STATE_VERSION,
            "status": self._status.value,
            "stream_index": self._stream_index,
            "since_training": self._since_training,
            "training_size": self.training_size,
            "dimension": self._dim,
            "config": self.config.to_dict(),
            "training_rows": [row.tolist() for row in self._training_rows],
            "buffer": self._buffer[: self._count].tolist() if self._buffer is not None else [],
            "calibration": self.calibration.to_json_dict() if self.calibration else None,
            "last_event": self.last_event.to_dict() if self.last_event else None,
        }
        return state

    @classmethod
    def from_state_json(
        cls, state: dict, sink: Callable[[DetectionEvent], None] | None = None
    ) -> "OnlineDetector":
        if state.get("format") != STATE_FORMAT or state.get("version") != STATE_VERSION:
            raise CalibrationMismatchError("unrecognized detector state artifact")
        config = WindowConfig.from_dict(state["config"])
        det = cls(config, int(state["training_size"]), sink)
        det._status = DetectorStatus(state["status"])
        det._stream_index = int(state["stream_index"])
        det._since_training = int(state["since_training"])
        det._dim = state["dimension"]
        det._training_rows = [np.asarray(r, dtype=np.float64) for r in state["training_rows"]]
        if state["calibration"] is not None:
            det.calibration = CalibrationTable.from_json_dict(state["calibration"])
        if state["last_event"] is not None:
            det.last_event = DetectionEvent.from_dict(state["last_event"])
        if det._status is not DetectorStatus.TRAINING:
            det._init_buffers()
            for row in state["buffer"]:
                det._append(np.asarray(row, dtype=np.float64))
        return det

    def save_state(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.state_json(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load_state(cls, path, sink=None) -> "OnlineDetector":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_state_json(json.load(fh), sink=sink)
