"""Command-line entry point.

Two modes:

  * detection: read a frame source, emit one report line per processed
    frame once the detector is initialized, optionally dumping feature
    vectors and persisting the model;
  * ``--fisher A.csv B.csv``: rank the 8 feature dimensions by their
    two-class separability using previously dumped feature CSVs.

Exit codes: 0 success, 1 configuration error, 2 stream/output error.
The LANEWATCH_CONFIG environment variable, when set, overrides --config.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .features import FEATURE_SYMBOLS, fisher_score, format_feature_vector, \
    parse_feature_vector
from .frameio import read_pgm, read_pgm_dir, read_raw_frames
from .geometry import LaneConfigError, LaneValidationError, RasterizationError, \
    parse_lane_config
from .gmm import load_model, save_model
from .pipeline import Detector, DetectorParams, StreamError, format_report, ingest

ENV_CONFIG = "LANEWATCH_CONFIG"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STREAM = 2


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lanewatch",
                description="Per-block vehicle presence and queue length "
                            "from grayscale traffic video.")
    p.add_argument("--config", help=f"lane configuration file "
                                    f"(${ENV_CONFIG} overrides this flag)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--raw", help="headerless 8-bit grayscale frame file")
    src.add_argument("--frames", help="directory of PGM files (lexical order)")
    p.add_argument("--width", type=int, default=352,
                   help="frame width for --raw input (default 352)")
    p.add_argument("--height", type=int, default=288,
                   help="frame height for --raw input (default 288)")
    p.add_argument("--source-fps", type=int, default=25)
    p.add_argument("--target-fps", type=int, default=5)
    p.add_argument("--init-samples", type=int, default=2000,
                   help="block samples to buffer before fitting (default 2000)")
    p.add_argument("--lambda", dest="forgetting", type=float, default=0.05,
                   help="online forgetting factor (default 0.05)")
    p.add_argument("--seed", type=int, default=0,
                   help="random seed for the unsupervised initialization")
    p.add_argument("--skip", type=int, default=0,
                   help="skip this many source frames; sequence numbers and "
                        "timestamps keep counting from zero")
    p.add_argument("--update-margin", type=float, default=None,
                   help="feed only samples with |discriminant| above this "
                        "margin back into the online update")
    p.add_argument("--per-lane-models", action="store_true",
                   help="learn one model per lane instead of a shared one")
    p.add_argument("--snapshot-out", help="write the model here on shutdown")
    p.add_argument("--snapshot-in", help="resume from a model snapshot "
                                         "(skips initialization)")
    p.add_argument("--dump-features", metavar="CSV",
                   help="append every extracted feature vector to this file")
    p.add_argument("--output", help="report sink (default stdout)")
    p.add_argument("--fisher", nargs=2, metavar=("A.CSV", "B.CSV"),
                   help="rank feature dimensions separating the two sample "
                        "files and exit")
    return p


def _load_feature_csv(path: str):
    import numpy as np

    rows = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(parse_feature_vector(line))
    if len(rows) < 2:
        raise ValueError(f"'{path}' needs at least 2 feature rows")
    return np.asarray(rows)


def _run_fisher(path_a: str, path_b: str, out) -> int:
    try:
        a = _load_feature_csv(path_a)
        b = _load_feature_csv(path_b)
    except (OSError, ValueError) as exc:
        print(f"lanewatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    scores = []
    for i, symbol in enumerate(FEATURE_SYMBOLS):
        try:
            j = fisher_score(a[:, i], b[:, i])
        except ValueError:
            j = float("nan")
        scores.append((symbol, j))
    scores.sort(key=lambda s: s[1], reverse=True)
    print(f"{'feature':<8}separating-distance", file=out)
    for symbol, j in scores:
        print(f"{symbol:<8}{j:.6f}", file=out)
    return EXIT_OK


def _frame_size(args) -> tuple[int, int]:
    if args.raw:
        return args.width, args.height
    files = sorted(p for p in Path(args.frames).iterdir()
                   if p.suffix.lower() == ".pgm")
    if not files:
        raise StreamError(f"no PGM files in '{args.frames}'")
    first = read_pgm(files[0])
    return first.shape[1], first.shape[0]


def _run_detection(args) -> int:
    config_path = os.environ.get(ENV_CONFIG) or args.config
    if not config_path:
        print("lanewatch: no lane configuration "
              f"(use --config or ${ENV_CONFIG})", file=sys.stderr)
        return EXIT_CONFIG
    if not args.raw and not args.frames:
        print("lanewatch: no frame source (use --raw or --frames)",
              file=sys.stderr)
        return EXIT_CONFIG

    try:
        config_text = open(config_path, "r", encoding="utf-8").read()
    except OSError as exc:
        print(f"lanewatch: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        width, height = _frame_size(args)
    except (OSError, StreamError) as exc:
        print(f"lanewatch: {exc}", file=sys.stderr)
        return EXIT_STREAM

    model = None
    dump = None
    try:
        lanes = parse_lane_config(config_text, width, height)
        if not lanes:
            raise LaneConfigError("configuration declares no lanes")
        if args.snapshot_in:
            model = load_model(args.snapshot_in)
        params = DetectorParams(
            init_samples=args.init_samples,
            forgetting=args.forgetting,
            seed=args.seed,
            update_margin=args.update_margin,
            per_lane_models=args.per_lane_models,
        )
        dump = open(args.dump_features, "w", encoding="ascii") \
            if args.dump_features else None
        sink_from_dump = (lambda lane_id, index, vec:
                          dump.write(format_feature_vector(vec) + "\n")) \
            if dump else None
        detector = Detector(lanes, width, height, params, model=model,
                            feature_sink=sink_from_dump)
    except (LaneConfigError, LaneValidationError, RasterizationError,
            OSError, ValueError) as exc:
        if dump is not None:
            dump.close()
        print(f"lanewatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.raw:
        source = read_raw_frames(args.raw, width, height,
                                 fps=args.source_fps, skip=args.skip)
    else:
        source = read_pgm_dir(args.frames, fps=args.source_fps, skip=args.skip)

    sink = None
    try:
        sink = open(args.output, "w", encoding="ascii") if args.output \
            else sys.stdout
        for frame in ingest(source, args.target_fps, args.source_fps):
            observations = detector.observe_frame(frame)
            if observations:
                line = format_report(detector.build_report(frame, observations))
                sink.write(line + "\n")
                sink.flush()
    except StreamError as exc:
        print(f"lanewatch: stream error: {exc}", file=sys.stderr)
        return EXIT_STREAM
    except (ValueError, RuntimeError) as exc:
        # e.g. initialization failed because the stream lacked class diversity
        print(f"lanewatch: {exc}", file=sys.stderr)
        return EXIT_STREAM
    except OSError as exc:
        print(f"lanewatch: output error: {exc}", file=sys.stderr)
        return EXIT_STREAM
    finally:
        if sink is not None and sink is not sys.stdout:
            sink.close()
        if dump is not None:
            dump.close()

    if args.snapshot_out:
        try:
            save_model(detector.model_snapshot(), args.snapshot_out)
        except RuntimeError:
            print("lanewatch: stream ended before initialization; "
                  "no snapshot written", file=sys.stderr)
        except OSError as exc:
            print(f"lanewatch: cannot write snapshot: {exc}", file=sys.stderr)
            return EXIT_STREAM
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.fisher:
        return _run_fisher(args.fisher[0], args.fisher[1], sys.stdout)
    return _run_detection(args)


if __name__ == "__main__":
    sys.exit(main())
