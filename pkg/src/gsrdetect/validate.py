"""Statistical self-tests tying the implementation to its moment structure.

Three checks: the exact algebraic identity behind the fast complete-graph
span, the Monte Carlo mean of the span against its closed-form moment, and
end-to-end null rejection rates of the calibrate-then-detect pipeline.  They
run from the test suite and from the CLI's ``--self-check`` mode.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time

import numpy as np

from .calibrate import CalibrationMode, calibrate
from .core import GraphKind, WindowConfig, seeded_rng
from .detect import OnlineDetector, Outcome, static_detect
from .graph import complete_spanning_distance, complete_spanning_distance_naive

logger = logging.getLogger(__name__)

_DOM_IDENTITY = 31
_DOM_MOMENTS = 32
_DOM_NULL = 33


@dataclasses.dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    measured: float
    target: float
    tolerance: float
    detail: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def check_spanning_identity(trials: int = 1000, seed: int = 0) -> CheckReport:
    """Identity path vs. pairwise path over random blocks, 1e-9 relative.

    Includes a large-common-offset stress case per trial batch, which the
    centered identity must survive.
    """
    rng = seeded_rng(seed, _DOM_IDENTITY)
    worst = 0.0
    for t in range(trials):
        m = int(rng.integers(4, 61))
        d = int(rng.integers(1, 51))
        block = rng.standard_normal((m, d)) * float(rng.uniform(0.5, 20.0))
        if t % 10 == 0:
            block = block + 1e6  # common offset: distances unchanged
        fast = complete_spanning_distance(block)
        naive = complete_spanning_distance_naive(block)
        scale = max(abs(naive), 1e-30)
        worst = max(worst, abs(fast - naive) / scale)
    zero = complete_spanning_distance(np.zeros((8, 3)))
    passed = worst <= 1e-9 and zero == 0.0
    return CheckReport(
        name="spanning_identity",
        passed=passed,
        measured=worst,
        target=0.0,
        tolerance=1e-9,
        detail={"trials": trials, "zero_block": zero},
    )


def check_dg_moments(
    m: int, d: int, sigma: float, trials: int = 5000, seed: int = 0
) -> CheckReport:
    """Monte Carlo mean of the complete-graph span against C(m,2) * 2 d sigma^2.

    Each pair of i.i.d. N(0, sigma^2 I_d) points spans 2 d sigma^2 in
    expectation, so the block total is the pair count times that.
    """
    if trials < 2000:
        raise ValueError("moment check needs at least 2000 trials")
    rng = seeded_rng(seed, (_DOM_MOMENTS, m, d))
    blocks = rng.standard_normal((trials, m, d)) * sigma
    centered = blocks - blocks.mean(axis=1, keepdims=True)
    q = np.einsum("tij,tij->t", centered, centered)
    s = centered.sum(axis=1)
    spans = m * q - np.einsum("tj,tj->t", s, s)
    target = (m * (m - 1) / 2) * 2.0 * d * sigma**2
    measured = float(spans.mean())
    se = float(spans.std(ddof=1) / math.sqrt(trials)) if sigma > 0 else 0.0
    tolerance = 3.0 * se
    passed = abs(measured - target) <= tolerance if sigma > 0 else measured == 0.0
    return CheckReport(
        name=f"dg_moments_m{m}_d{d}",
        passed=passed,
        measured=measured,
        target=target,
        tolerance=tolerance,
        detail={"trials": trials, "sigma": sigma, "standard_error": se},
    )


def check_null_rates(
    mode: str = "static",
    trials: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
    dimension: int = 10,
    lengths: tuple[int, ...] = (40,),
    permutations: int = 500,
    training: int = 200,
    monitor: int = 100,
    graph_kind: GraphKind = GraphKind.COMPLETE,
) -> CheckReport:
    """Rejection rate of the full pipeline on no-change data.

    Every trial draws fresh training data, calibrates, and tests fresh
    no-change data; the empirical rate must stay within
    alpha + 2 * sqrt(alpha (1 - alpha) / trials).
    """
    mode = CalibrationMode(mode)
    rejected = 0
    for t in range(trials):
        rng = seeded_rng(seed, (_DOM_NULL, int(mode is CalibrationMode.ONLINE), dimension, t))
        train = rng.standard_normal((training, dimension))
        cfg = WindowConfig(
            lengths=lengths,
            alpha=alpha,
            permutations=permutations,
            graph_kind=graph_kind,
            seed=int(rng.integers(2**63)),
        )
        if mode is CalibrationMode.STATIC:
            table = calibrate(train, cfg, CalibrationMode.STATIC)
            block = rng.standard_normal((lengths[0], dimension))
            if static_detect(block, table).outcome is Outcome.REJECT:
                rejected += 1
        else:
            table = calibrate(train, cfg, CalibrationMode.ONLINE)
            detector = OnlineDetector.from_calibration(table)
            for row in rng.standard_normal((monitor, dimension)):
                if detector.push(row) is not None:
                    rejected += 1
                    break
    rate = rejected / trials
    slack = 2.0 * math.sqrt(alpha * (1.0 - alpha) / trials)
    passed = rate <= alpha + slack
    return CheckReport(
        name=f"null_rate_{mode.value}",
        passed=passed,
        measured=rate,
        target=alpha,
        tolerance=slack,
        detail={
            "trials": trials,
            "dimension": dimension,
            "lengths": list(lengths),
            "permutations": permutations,
            "training": training,
        },
    )


def self_check(seed: int = 0, fast: bool = False) -> dict:
    """Run all checks with default parameters; returns a JSON-able summary."""
    started = time.monotonic()
    null_trials = 200 if fast else 500
    moment_trials = 2000 if fast else 5000
    checks = [
        check_spanning_identity(trials=300 if fast else 1000, seed=seed),
        check_dg_moments(10, 5, 1.0, trials=moment_trials, seed=seed),
        check_null_rates(
            mode="static",
            trials=null_trials,
            seed=seed,
            alpha=0.05,
            dimension=5,
            lengths=(40,),
            permutations=200 if fast else 500,
        ),
    ]
    for check in checks:
        logger.info(
            "%s: %s (measured %.6g, target %.6g, tolerance %.3g)",
            check.name, "pass" if check.passed else "FAIL",
            check.measured, check.target, check.tolerance,
        )
    return {
        "seed": seed,
        "fast": fast,
        "elapsed_seconds": round(time.monotonic() - started, 3),
        "checks": [c.to_dict() for c in checks],
        "passed": all(c.passed for c in checks),
    }
