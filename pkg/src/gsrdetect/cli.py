"""Command-line front end: calibrate, detect, stream, simulate, self-check.

Configuration precedence is defaults < --config file < explicit flags.  Exit
codes: 0 means the run completed with no detection, 10 means a change was
detected, and other non-zero codes below 10 are errors, so shell pipelines
can branch on detection.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .calibrate import CalibrationMode, CalibrationTable, calibrate
from .core import (
    GraphKind,
    GsrError,
    Multiplicity,
    ObservationError,
    WindowConfig,
)
from .detect import OnlineDetector, Outcome, static_detect
from .ingest import ingest, read_block
from .simulate import (
    ChangeKind,
    Method,
    ONLINE_METHODS,
    STATIC_METHODS,
    run_online_power,
    run_static_power,
    write_power_csv,
    write_power_json,
)
from .validate import self_check

logger = logging.getLogger("gsrdetect")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DETECTED = 10

SEED_ENV_VAR = "GSRDETECT_SEED"

PRESET_DIMS = (1, 10, 50, 100, 300, 500)


def _parse_windows(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.replace("+", ",").split(",") if part.strip())


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsrdetect",
        description="Graph-spanning-ratio change-point detection.",
    )
    parser.add_argument("--version", action="version", version=f"gsrdetect {__version__}")
    parser.add_argument(
        "--self-check", action="store_true", dest="top_self_check",
        help="run the statistical self-tests and print a JSON summary",
    )
    parser.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV_VAR} or 0)")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")

    sub = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--windows", type=_parse_windows, default=None, help="comma-separated window lengths")
    common.add_argument("--alpha", type=float, default=None, help="significance level")
    common.add_argument("--permutations", type=int, default=None, help="permutation count")
    common.add_argument("--graph", choices=[g.value for g in GraphKind], default=None)
    common.add_argument("--multiplicity", choices=[m.value for m in Multiplicity], default=None)
    # SUPPRESS so a sub-command without --seed keeps the top-level value
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    p_cal = sub.add_parser("calibrate", parents=[common], help="estimate thresholds from no-change data")
    p_cal.add_argument("--input", required=True, help="observations (CSV/JSONL path or -)")
    p_cal.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p_cal.add_argument("--output", required=True, help="calibration artifact path (JSON)")
    p_cal.add_argument("--mode", choices=[m.value for m in CalibrationMode], default="online")

    p_det = sub.add_parser("detect", parents=[common], help="test one block against a static calibration")
    p_det.add_argument("--input", required=True)
    p_det.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p_det.add_argument("--calibration", required=True)

    p_str = sub.add_parser("stream", parents=[common], help="monitor a stream with an online calibration")
    p_str.add_argument("--input", required=True)
    p_str.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p_str.add_argument("--calibration", required=True)
    p_str.add_argument("--output", default="-", help="event log (JSON-lines; default stdout)")
    p_str.add_argument("--multi", action="store_true", help="reset and keep monitoring after each event")

    p_sim = sub.add_parser("simulate", parents=[common], help="run detection-power studies")
    p_sim.add_argument("--preset", choices=["table2", "table3", "figure2", "figure3", "figure4"])
    p_sim.add_argument("--mode", choices=["static", "online"], default=None)
    p_sim.add_argument("--change", choices=[c.value for c in ChangeKind if c is not ChangeKind.NONE], default=None)
    p_sim.add_argument("--dims", type=_parse_windows, default=None, help="comma-separated dimensions")
    p_sim.add_argument("--methods", default=None, help="comma-separated method names")
    p_sim.add_argument("--trials", type=int, default=None, help="samples per grid cell")
    p_sim.add_argument("--output", default="gsr_report", help="output path prefix")

    p_chk = sub.add_parser("self-check", help="run the statistical self-tests")
    p_chk.add_argument("--fast", action="store_true", help="reduced trial counts")
    p_chk.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    return parser


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise GsrError("config file must hold a JSON object")
    return data


def _resolve_window_config(args, file_cfg: dict, default_windows=(40, 70, 100)) -> WindowConfig:
    def pick(flag, key, fallback):
        if flag is not None:
            return flag
        if key in file_cfg:
            return file_cfg[key]
        return fallback

    seed = args.seed if args.seed is not None else file_cfg.get("seed", _default_seed())
    return WindowConfig(
        lengths=tuple(pick(args.windows, "windows", default_windows)),
        alpha=float(pick(args.alpha, "alpha", 0.05)),
        permutations=int(pick(args.permutations, "permutations", 500)),
        graph_kind=GraphKind(pick(args.graph, "graph", GraphKind.COMPLETE)),
        seed=int(seed),
        multiplicity=Multiplicity(pick(args.multiplicity, "multiplicity", Multiplicity.FAMILYWISE)),
    )


def _cmd_calibrate(args) -> int:
    file_cfg = _load_config_file(args.config)
    config = _resolve_window_config(args, file_cfg)
    mode = CalibrationMode(args.mode)
    block = read_block(args.input, fmt=args.format)
    needed = max(config.lengths) + 2
    if block.shape[0] < needed:
        raise ObservationError(
            f"calibration needs at least {needed} observations "
            f"(largest window + 2), got {block.shape[0]}"
        )
    table = calibrate(block, config, mode)
    table.save(args.output)
    header = {
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "mode": mode.value,
        "seed": config.seed,
        "version": __version__,
    }
    print(f"# {json.dumps(header, sort_keys=True)}")
    print(f"alpha_star={table.alpha_star:.6g}")
    for n in table.lengths:
        for stat in ("mean", "variance"):
            print(f"threshold n={n} {stat}={table.threshold(n, stat):.6g}")
    logger.info("calibration written to %s", args.output)
    return EXIT_OK


def _cmd_detect(args) -> int:
    table = CalibrationTable.load(args.calibration)
    file_cfg = _load_config_file(args.config)
    if args.windows or args.alpha or args.permutations or args.graph or file_cfg:
        config = _resolve_window_config(args, file_cfg)
        table.check_compatible(config)
    block = read_block(args.input, fmt=args.format)
    decision = static_detect(block, table)
    print(json.dumps(decision.to_dict(), sort_keys=True))
    return EXIT_DETECTED if decision.outcome is Outcome.REJECT else EXIT_OK


def _cmd_stream(args) -> int:
    table = CalibrationTable.load(args.calibration)
    file_cfg = _load_config_file(args.config)
    if args.windows or args.alpha or args.permutations or args.graph or file_cfg:
        config = _resolve_window_config(args, file_cfg)
        table.check_compatible(config)
    out = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8")
    detected = 0
    try:
        header = {
            "config": table.config.to_dict(),
            "config_hash": table.config_digest(),
            "seed": table.config.seed,
            "version": __version__,
        }
        out.write(f'{{"header": {json.dumps(header, sort_keys=True)}}}\n')
        detector = OnlineDetector.from_calibration(table)
        for obs in ingest(args.input, fmt=args.format):
            event = detector.push(obs)
            if event is not None:
                detected += 1
                out.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
                if not args.multi:
                    break
                detector.reset()
    finally:
        if out is not sys.stdout:
            out.close()
    logger.info("stream finished: %d event(s)", detected)
    return EXIT_DETECTED if detected else EXIT_OK


_PRESETS = {
    "table2": dict(mode="online", change=ChangeKind.MEAN, dims=PRESET_DIMS,
                   methods=ONLINE_METHODS, alpha=0.10),
    "table3": dict(mode="online", change=ChangeKind.VARIANCE, dims=PRESET_DIMS,
                   methods=ONLINE_METHODS, alpha=0.10),
    "figure2": dict(mode="static", change=ChangeKind.MEAN, dims=PRESET_DIMS,
                    methods=STATIC_METHODS, alpha=0.05),
    "figure3": dict(mode="static", change=ChangeKind.VARIANCE, dims=PRESET_DIMS,
                    methods=STATIC_METHODS, alpha=0.05),
    "figure4": dict(mode="online-grid", change=None, dims=PRESET_DIMS,
                    methods=ONLINE_METHODS, alpha=0.10),
}


def _cmd_simulate(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else file_cfg.get("seed", _default_seed())
    windows = args.windows or tuple(file_cfg.get("windows", (40, 70, 100)))
    permutations = args.permutations or int(file_cfg.get("permutations", 500))
    trials = args.trials or int(file_cfg.get("trials", 200))

    if args.preset:
        preset = _PRESETS[args.preset]
        mode = preset["mode"]
        dims = args.dims or preset["dims"]
        alpha = args.alpha if args.alpha is not None else preset["alpha"]
        methods = preset["methods"]
        change = preset["change"]
    else:
        mode = args.mode or file_cfg.get("mode")
        change = ChangeKind(args.change) if args.change else None
        dims = args.dims or tuple(file_cfg.get("dims", ()))
        alpha = args.alpha if args.alpha is not None else float(file_cfg.get("alpha", 0.05))
        methods = None
        if not mode or change is None or not dims:
            raise GsrError("simulate needs --preset, or --mode, --change and --dims")
    if args.methods:
        methods = tuple(Method(m) for m in args.methods.split(","))

    if mode == "static":
        cells = run_static_power(
            dims, windows, change, trials=trials,
            methods=methods or STATIC_METHODS,
            alpha=alpha, seed=seed, permutations=permutations,
        )
    elif mode == "online":
        cells = run_online_power(
            dims, windows, change, samples=trials,
            methods=methods or ONLINE_METHODS,
            alpha=alpha, seed=seed, permutations=permutations,
        )
    else:  # figure4: one online run per (dimension, single window, change kind)
        cells = []
        for kind in (ChangeKind.MEAN, ChangeKind.VARIANCE):
            for n in windows:
                cells.extend(
                    run_online_power(
                        dims, (n,), kind, samples=trials,
                        methods=methods or ONLINE_METHODS,
                        alpha=alpha, seed=seed, permutations=permutations,
                    )
                )
    meta = {
        "preset": args.preset,
        "mode": mode,
        "alpha": alpha,
        "windows": list(windows),
        "permutations": permutations,
        "trials": trials,
        "seed": int(seed),
        "version": __version__,
    }
    csv_path = f"{args.output}.csv"
    json_path = f"{args.output}.json"
    write_power_csv(cells, csv_path, meta)
    write_power_json(cells, json_path, meta)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def _cmd_self_check(args) -> int:
    seed = args.seed if getattr(args, "seed", None) is not None else _default_seed()
    summary = self_check(seed=seed, fast=getattr(args, "fast", False))
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK if summary["passed"] else EXIT_ERROR


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.top_self_check:
            return _cmd_self_check(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "detect":
            return _cmd_detect(args)
        if args.command == "stream":
            return _cmd_stream(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "self-check":
            return _cmd_self_check(args)
        parser.print_help()
        return EXIT_ERROR
    except GsrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
