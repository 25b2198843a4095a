"""Permutation calibration of the spanning-ratio statistics.

Null distributions are estimated by permuting a training block: the static
null re-evaluates the statistics on the first n entries of each permutation,
and the online null takes the maximum over every window position inside the
training range.  Thresholds are empirical upper-tail quantiles; when several
windows and both statistics are monitored together, a per-test level
``alpha_star`` is chosen so the family-wise exceedance rate stays at the
nominal level.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import math

import numpy as np

from . import _kernels
from .core import (
    CalibrationMismatchError,
    ConfigError,
    DegenerateTrainingError,
    GraphKind,
    Multiplicity,
    ObservationError,
    Statistic,
    WindowConfig,
    as_block,
    seeded_rng,
)

logger = logging.getLogger(__name__)

CALIBRATION_FORMAT = "gsrdetect-calibration"
CALIBRATION_VERSION = 1

# sub-stream domain for permutation draws: (domain, permutation index, attempt)
_DOM_PERM = 11

_MAX_REDRAW_ROUNDS = 12


class CalibrationMode(str, enum.Enum):
    STATIC = "static"
    ONLINE = "online"


def permute(block, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random reordering of a block; the multiset is preserved."""
    x = as_block(block)
    return x[rng.permutation(x.shape[0])]


def quantile_threshold(sorted_values: np.ndarray, level: float) -> float:
    """Upper-tail empirical quantile with the +1 permutation correction.

    Returns the ``ceil((1 - level) * (k + 1))``-th order statistic of the
    ascending ``sorted_values``, clamped to the observed range.  This is the
    smallest x with an estimated exceedance probability at most ``level``.
    """
    k = len(sorted_values)
    if k < 1:
        raise ConfigError("empty permutation vector")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"quantile level must be in (0, 1), got {level}")
    r = math.ceil((1.0 - level) * (k + 1))
    r = min(max(r, 1), k)
    return float(sorted_values[r - 1])


def lower_quantile_threshold(sorted_values: np.ndarray, level: float) -> float:
    """Lower-tail mirror of :func:`quantile_threshold` (reject small values)."""
    neg = np.sort(-np.asarray(sorted_values, dtype=np.float64))
    return -quantile_threshold(neg, level)


def family_exceedance(values: np.ndarray, thresholds: np.ndarray) -> float:
    """Fraction of permutations where any row meets or exceeds its threshold.

    ``values`` is a (pairs, k) matrix aligned by permutation index, which is
    what makes the joint event well defined.
    """
    hits = values >= thresholds[:, None]
    return float(np.any(hits, axis=0).mean())


@dataclasses.dataclass(frozen=True)
class AlphaStarResult:
    alpha_star: float
    family_rate: float
    fallback: bool


def calibrate_alpha_star(
    values: np.ndarray,
    alpha: float,
    multiplicity: Multiplicity = Multiplicity.FAMILYWISE,
    resolution_div: int = 64,
) -> AlphaStarResult:
    """Per-test level for jointly monitored (window, statistic) pairs.

    ``values`` is a (pairs, k) matrix computed from shared permutation draws.
    The family-wise mode finds the largest level z <= alpha at which the
    fraction of permutations with any pair at or above its own
    ``quantile_threshold(.,  z)`` stays <= alpha, searching the halving grid
    alpha, alpha/2, ... and refining by bisection to resolution
    alpha / resolution_div.  If nothing on the grid passes, fall back to the
    Bonferroni level alpha / pairs and warn.

    The literal mode instead keeps the largest z at which at least one pair's
    own strict exceedance rate is below alpha; it is provided for comparison
    and does not control the family-wise rate.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ConfigError(f"values must be (pairs, k), got shape {values.shape}")
    pairs, k = values.shape
    sorted_rows = np.sort(values, axis=1)

    if multiplicity is Multiplicity.LITERAL:
        def passes(z: float) -> bool:
            for p in range(pairs):
                thr = quantile_threshold(sorted_rows[p], z)
                if float((values[p] > thr).mean()) < alpha:
                    return True
            return False
    else:
        def passes(z: float) -> bool:
            thr = np.array([quantile_threshold(sorted_rows[p], z) for p in range(pairs)])
            return family_exceedance(values, thr) <= alpha

    def rate(z: float) -> float:
        thr = np.array([quantile_threshold(sorted_rows[p], z) for p in range(pairs)])
        return family_exceedance(values, thr)

    bonferroni = alpha / pairs
    floor = min(alpha / resolution_div, bonferroni)
    z = alpha
    z_fail = None
    while z >= floor:
        if passes(z):
            break
        z_fail = z
        z /= 2.0
    else:
        logger.warning(
            "no level on the halving grid controls the family-wise rate; "
            "falling back to the Bonferroni level %.6g", bonferroni,
        )
        return AlphaStarResult(bonferroni, rate(bonferroni), True)

    z_pass = z
    if z_fail is not None:
        step = alpha / resolution_div
        lo, hi = z_pass, z_fail
        while hi - lo > step:
            mid = 0.5 * (lo + hi)
            if passes(mid):
                lo = mid
            else:
                hi = mid
        z_pass = lo
    return AlphaStarResult(z_pass, rate(z_pass), False)


# ---------------------------------------------------------------------------
# permutation null estimation
# ---------------------------------------------------------------------------

def _draw_perms(seed: int, slots: np.ndarray, size: int, attempt: int) -> np.ndarray:
    """One permutation per slot, each from its own (seed, index) sub-stream."""
    out = np.empty((len(slots), size), dtype=np.int64)
    for row, b in enumerate(slots):
        out[row] = seeded_rng(seed, (_DOM_PERM, int(b), attempt)).permutation(size)
    return out


def _null_matrix(
    training: np.ndarray,
    lengths: tuple[int, ...],
    k: int,
    kind: GraphKind,
    seed: int,
    mode: CalibrationMode,
) -> tuple[dict[tuple[int, Statistic], np.ndarray], int]:
    """Aligned permutation statistics for every (length, statistic) pair.

    All lengths share the permutation draw of the same index, so joint
    maxima across pairs are coherent.  Degenerate draws (no valid window
    position) are redrawn from fresh sub-streams; calibration aborts when
    more than half of all draws come back degenerate.
    """
    N = training.shape[0]
    x = np.ascontiguousarray(training - training.mean(axis=0))
    D = _kernels.pairwise_sq_dists(x) if kind is GraphKind.MST else None

    values = {(n, stat): np.full(k, np.nan) for n in lengths for stat in Statistic}
    pending = np.arange(k)
    total_draws = 0
    degenerate_draws = 0
    for attempt in range(_MAX_REDRAW_ROUNDS):
        if pending.size == 0:
            break
        perms = _draw_perms(seed, pending, N, attempt)
        flagged = np.zeros(len(pending), dtype=bool)
        for n in lengths:
            if kind is GraphKind.COMPLETE:
                fn = (
                    _kernels.complete_null_static
                    if mode is CalibrationMode.STATIC
                    else _kernels.complete_null_online
                )
                mu, sig, deg = fn(x, n, perms)
            else:
                fn = (
                    _kernels.mst_null_static
                    if mode is CalibrationMode.STATIC
                    else _kernels.mst_null_online
                )
                mu, sig, deg = fn(D, n, perms)
            values[(n, Statistic.MEAN)][pending] = mu
            values[(n, Statistic.VARIANCE)][pending] = sig
            flagged |= np.asarray(deg, dtype=bool)
        total_draws += len(pending)
        degenerate_draws += int(flagged.sum())
        if total_draws >= 20 and degenerate_draws > 0.5 * total_draws:
            raise DegenerateTrainingError(
                f"{degenerate_draws} of {total_draws} permutation draws were degenerate; "
                "the training block has too little spread to calibrate"
            )
        pending = pending[flagged]
    if pending.size:
        raise DegenerateTrainingError(
            f"{pending.size} permutation slots stayed degenerate after "
            f"{_MAX_REDRAW_ROUNDS} redraw rounds"
        )
    return values, degenerate_draws


def static_null(
    training, n: int, k: int, kind: GraphKind, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sorted permutation null vectors (mean ratio, variance ratio).

    Each of the k draws permutes the training block and evaluates the
    statistics on its first n entries with the midpoint split.
    """
    x = as_block(training)
    if x.shape[0] < n:
        raise ObservationError(f"training length {x.shape[0]} is below window length {n}")
    values, _ = _null_matrix(x, (int(n),), k, GraphKind(kind), seed, CalibrationMode.STATIC)
    return (
        np.sort(values[(n, Statistic.MEAN)]),
        np.sort(values[(n, Statistic.VARIANCE)]),
    )


def online_null(
    training, n: int, k: int, kind: GraphKind, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sorted max-over-position null vectors for the online detector.

    Per draw, the permuted training block is scanned at every window start
    and the largest value of each statistic is recorded.  With training
    length equal to n the single position makes this coincide with
    :func:`static_null`.
    """
    x = as_block(training)
    if x.shape[0] < n:
        raise ObservationError(
            f"training length {x.shape[0]} leaves no window position for length {n}"
        )
    values, _ = _null_matrix(x, (int(n),), k, GraphKind(kind), seed, CalibrationMode.ONLINE)
    return (
        np.sort(values[(n, Statistic.MEAN)]),
        np.sort(values[(n, Statistic.VARIANCE)]),
    )


# ---------------------------------------------------------------------------
# calibration table
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class CalEntry:
    """Sorted permutation values and the derived threshold for one pair."""

    values: np.ndarray
    threshold: float


@dataclasses.dataclass(frozen=True)
class CalibrationTable:
    """Thresholds plus the permutation vectors they came from.

    Immutable after construction; safe to share between detectors.
    """

    mode: CalibrationMode
    config: WindowConfig
    dimension: int
    training_size: int
    alpha_star: float
    alpha_star_fallback: bool
    entries: dict[tuple[int, Statistic], CalEntry]
    degenerate_redraws: int = 0
    version: int = CALIBRATION_VERSION

    @property
    def lengths(self) -> tuple[int, ...]:
        return self.config.lengths

    @property
    def graph_kind(self) -> GraphKind:
        return self.config.graph_kind

    def threshold(self, n: int, statistic: Statistic) -> float:
        return self.entries[(int(n), Statistic(statistic))].threshold

    def config_digest(self) -> str:
        return self.config.digest()

    def to_json_dict(self) -> dict:
        return {
            "format": CALIBRATION_FORMAT,
            "version": self.version,
            "mode": self.mode.value,
            "config": self.config.to_dict(),
            "config_hash": self.config_digest(),
            "dimension": self.dimension,
            "training_size": self.training_size,
            "alpha_star": self.alpha_star,
            "alpha_star_fallback": self.alpha_star_fallback,
            "degenerate_redraws": self.degenerate_redraws,
            "entries": {
                str(n): {
                    stat.value: {
                        "threshold": self.entries[(n, stat)].threshold,
                        "values": self.entries[(n, stat)].values.tolist(),
                    }
                    for stat in Statistic
                }
                for n in self.lengths
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CalibrationTable":
        if data.get("format") != CALIBRATION_FORMAT:
            raise CalibrationMismatchError("not a calibration artifact")
        if data.get("version") != CALIBRATION_VERSION:
            raise CalibrationMismatchError(
                f"unsupported calibration version {data.get('version')!r}"
            )
        config = WindowConfig.from_dict(data["config"])
        if data.get("config_hash") != config.digest():
            raise CalibrationMismatchError("calibration config hash does not match its config")
        entries = {}
        for n_str, stats in data["entries"].items():
            n = int(n_str)
            for stat_name, entry in stats.items():
                entries[(n, Statistic(stat_name))] = CalEntry(
                    values=np.asarray(entry["values"], dtype=np.float64),
                    threshold=float(entry["threshold"]),
                )
        return cls(
            mode=CalibrationMode(data["mode"]),
            config=config,
            dimension=int(data["dimension"]),
            training_size=int(data["training_size"]),
            alpha_star=float(data["alpha_star"]),
            alpha_star_fallback=bool(data.get("alpha_star_fallback", False)),
            entries=entries,
            degenerate_redraws=int(data.get("degenerate_redraws", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def check_compatible(self, config: WindowConfig) -> None:
        if config.digest() != self.config_digest():
            raise CalibrationMismatchError(
                "calibration was built for a different configuration "
                f"(hash {self.config_digest()[:12]}, requested {config.digest()[:12]})"
            )


def calibrate(training, config: WindowConfig, mode: CalibrationMode) -> CalibrationTable:
    """Build a calibration table from a no-change training block.

    The permutation draws are shared across window lengths, the per-test
    level is chosen per ``config.multiplicity``, and every threshold is the
    upper-tail quantile of its own sorted vector at that level.
    """
    x = as_block(training)
    mode = CalibrationMode(mode)
    n_max = max(config.lengths)
    if x.shape[0] < n_max:
        raise ObservationError(
            f"training length {x.shape[0]} is below the largest window {n_max}"
        )
    values, redraws = _null_matrix(
        x, config.lengths, config.permutations, config.graph_kind, config.seed, mode
    )
    matrix = np.stack([values[key] for key in sorted(values, key=lambda t: (t[0], t[1].value))])
    keys = sorted(values, key=lambda t: (t[0], t[1].value))
    result = calibrate_alpha_star(matrix, config.alpha, config.multiplicity)
    entries = {}
    for key in keys:
        sorted_vals = np.sort(values[key])
        entries[key] = CalEntry(
            values=sorted_vals,
            threshold=quantile_threshold(sorted_vals, result.alpha_star),
        )
    return CalibrationTable(
        mode=mode,
        config=config,
        dimension=x.shape[1],
        training_size=x.shape[0],
        alpha_star=result.alpha_star,
        alpha_star_fallback=result.fallback,
        entries=entries,
        degenerate_redraws=redraws,
    )
