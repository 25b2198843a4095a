"""Shared domain types, configuration, and deterministic randomness."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from typing import Iterable, Iterator, Sequence

import numpy as np


class GsrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GsrError):
    """Invalid configuration value."""


class ObservationError(GsrError):
    """Malformed or non-finite observation data."""


class DegenerateWindowError(GsrError):
    """A window half spans zero distance, so the ratio statistics are undefined."""


class DegenerateTrainingError(GsrError):
    """Too many permutation draws were degenerate to calibrate thresholds."""


class DetectorStateError(GsrError):
    """Operation is not valid in the detector's current state."""


class CalibrationMismatchError(GsrError):
    """Calibration artifact does not match the requested configuration or data."""


class GraphKind(str, enum.Enum):
    COMPLETE = "complete"
    MST = "mst"


class Statistic(str, enum.Enum):
    MEAN = "mean"
    VARIANCE = "variance"


class Multiplicity(str, enum.Enum):
    """How the per-test level is spread across windows and statistics.

    FAMILYWISE jointly controls the probability that *any* window/statistic
    pair exceeds its threshold.  LITERAL keeps the largest level at which at
    least one pair stays below the nominal rate; it does not control the
    family-wise rate and exists for comparison only.
    """

    FAMILYWISE = "familywise"
    LITERAL = "literal"


_MAX_SEED = 2**64


def seeded_rng(seed: int, sub_stream: int | Sequence[int] = 0) -> np.random.Generator:
    """Return a generator that is a pure function of ``(seed, sub_stream)``.

    Distinct sub-streams yield statistically independent sequences, so
    randomized work can be keyed by index (e.g. one sub-stream per
    permutation) and run in any order, serial or parallel, with identical
    results.  ``sub_stream`` may be a single index or a tuple of indices for
    nested contexts.
    """
    if not 0 <= int(seed) < _MAX_SEED:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if isinstance(sub_stream, (int, np.integer)):
        key: tuple[int, ...] = (int(sub_stream),)
    else:
        key = tuple(int(s) for s in sub_stream)
    if any(s < 0 for s in key):
        raise ConfigError(f"sub_stream indices must be non-negative, got {sub_stream!r}")
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


@dataclasses.dataclass(frozen=True)
class WindowConfig:
    """Scanning-window configuration shared by calibration and detection.

    ``lengths`` are the scanning window sizes; each must be even (windows are
    split into equal halves) and at least 4.  ``permutations`` is the number
    of permutation draws used to estimate null distributions.
    """

    lengths: tuple[int, ...]
    alpha: float = 0.05
    permutations: int = 500
    graph_kind: GraphKind = GraphKind.COMPLETE
    seed: int = 0
    multiplicity: Multiplicity = Multiplicity.FAMILYWISE
    stride: int = 1

    def __post_init__(self):
        lengths = tuple(int(n) for n in self.lengths)
        if not lengths:
            raise ConfigError("at least one window length is required")
        lengths = tuple(sorted(lengths))
        for n in lengths:
            if n < 4:
                raise ConfigError(f"window length {n} is below the minimum of 4")
            if n % 2:
                raise ConfigError(f"window length {n} is odd; windows are split into halves")
        if len(set(lengths)) != len(lengths):
            raise ConfigError(f"duplicate window lengths in {lengths}")
        object.__setattr__(self, "lengths", lengths)
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.permutations < 1:
            raise ConfigError(f"permutations must be >= 1, got {self.permutations}")
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        object.__setattr__(self, "graph_kind", GraphKind(self.graph_kind))
        object.__setattr__(self, "multiplicity", Multiplicity(self.multiplicity))

    def to_dict(self) -> dict:
        return {
            "lengths": list(self.lengths),
            "alpha": self.alpha,
            "permutations": self.permutations,
            "graph_kind": self.graph_kind.value,
            "seed": int(self.seed),
            "multiplicity": self.multiplicity.value,
            "stride": self.stride,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WindowConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        kwargs["lengths"] = tuple(kwargs.get("lengths", ()))
        return cls(**kwargs)

    def digest(self) -> str:
        """Stable hash of the configuration, embedded in artifacts."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclasses.dataclass(frozen=True)
class SplitStatistics:
    """The pair of spanning-ratio statistics for one window and split."""

    mean_ratio: float
    variance_ratio: float
    split_index: int

    def value(self, statistic: Statistic) -> float:
        return self.mean_ratio if statistic is Statistic.MEAN else self.variance_ratio


@dataclasses.dataclass(frozen=True)
class DetectionEvent:
    """A rejection of the no-change hypothesis by the online detector.

    ``estimated_change_point`` is always ``stream_index - window_length // 2``:
    the change is placed half a window before the observation that triggered
    the decision.
    """

    stream_index: int
    window_length: int
    statistic: Statistic
    value: float
    threshold: float
    estimated_change_point: int

    def to_dict(self) -> dict:
        return {
            "stream_index": self.stream_index,
            "window_length": self.window_length,
            "statistic": self.statistic.value,
            "value": self.value,
            "threshold": self.threshold,
            "estimated_change_point": self.estimated_change_point,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectionEvent":
        return cls(
            stream_index=int(data["stream_index"]),
            window_length=int(data["window_length"]),
            statistic=Statistic(data["statistic"]),
            value=float(data["value"]),
            threshold=float(data["threshold"]),
            estimated_change_point=int(data["estimated_change_point"]),
        )


def as_observation(values, dim: int | None = None, where: str = "") -> np.ndarray:
    """Validate one observation: a finite 1-D real vector of length ``dim``."""
    arr = np.asarray(values, dtype=np.float64)
    ctx = f" {where}" if where else ""
    if arr.ndim != 1 or arr.size == 0:
        raise ObservationError(f"observation{ctx} must be a non-empty 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise ObservationError(f"observation{ctx} has dimension {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ObservationError(f"observation{ctx} contains a non-finite value")
    return arr


def as_block(data) -> np.ndarray:
    """Validate a block of observations as a finite (m, d) float array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ObservationError(f"block must be a non-empty (m, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ObservationError("block contains a non-finite value")
    return np.ascontiguousarray(arr)


def validate_stream(observations: Iterable, dim: int | None = None) -> Iterator[np.ndarray]:
    """Yield validated observations, fixing the dimension from the first one.

    A non-finite or ragged record aborts the stream with a diagnostic naming
    its position rather than letting bad values propagate into distances.
    """
    expected = dim
    for i, values in enumerate(observations):
        obs = as_observation(values, dim=expected, where=f"at position {i}")
        if expected is None:
            expected = obs.size
        yield obs
