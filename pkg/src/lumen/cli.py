"""Command line entry points: train, bench, replay, codec-test.

Errors are reported as one JSON object per line on stderr and a nonzero
exit status; argparse usage problems exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from . import bench as bench_mod
from . import evlc

SEED_ENV = "LUMEN_SEED"


def _fail(message: str, code: int = 1, **extra) -> int:
    payload = {"error": message}
    payload.update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _default_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise bench_mod.ConfigError(
            f"{SEED_ENV} must be an integer, got {raw!r}")


def _echo(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_train(args) -> int:
    config = bench_mod.load_config(args.config)
    seed = args.seed if args.seed is not None else _default_seed()
    seeds = [seed] if seed is not None else None
    t0 = time.perf_counter()
    paths = bench_mod.train_runs(config, args.out, seeds=seeds, echo=_echo)
    _echo(f"wrote {len(paths)} checkpoints under {args.out} "
          f"in {time.perf_counter() - t0:.1f}s")
    for p in paths:
        print(p)
    return 0


def cmd_bench(args) -> int:
    config = bench_mod.load_config(args.config)
    report = bench_mod.run_benchmark(config, args.out, workers=args.workers,
                                     echo=_echo)
    csv_path, json_path = bench_mod.write_report(report, args.out)
    _echo(f"wall time {report.wall_time_s:.1f}s")
    print(csv_path)
    print(json_path)
    return 0


def cmd_replay(args) -> int:
    values = bench_mod.replay_metrics(args.trace)
    print(json.dumps(values, indent=1, sort_keys=True))
    return 0


def cmd_codec_test(args) -> int:
    rows = []
    seed = args.seed if args.seed is not None else (_default_seed() or 0)
    t0 = time.perf_counter()
    rate = evlc.roundtrip_trials(args.payloads, seed=seed,
                                 noise_rate_hz=args.noise_rate)
    rows.append(("roundtrip", args.payloads, rate))
    for frac in args.occlusion or []:
        rate = evlc.occlusion_trials(args.occlusion_trials, frac, seed=seed)
        rows.append((f"occlusion={frac}", args.occlusion_trials, rate))
    for speed in args.speeds or []:
        rate = evlc.speed_trials(args.speed_trials, speed, seed=seed)
        rows.append((f"speed={speed}", args.speed_trials, rate))
    _echo(f"codec-test finished in {time.perf_counter() - t0:.1f}s")

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["parameter", "trials", "success_rate"])
    for name, trials, rate in rows:
        w.writerow([name, trials, repr(rate)])
    text = buf.getvalue()
    if args.out:
        path = Path(args.out) / "codec_test.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        print(path)
    else:
        print(text, end="")
    return 0


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lumen",
        description="Multi-agent event-VLC simulator and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train policies for a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help=f"single seed override (default: config seeds or "
                        f"${SEED_ENV})")
    p.add_argument("--out", default="runs")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("bench", help="benchmark trained checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="runs")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("replay", help="recompute metrics from a trace file")
    p.add_argument("--trace", required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("codec-test", help="event-VLC codec property sweeps")
    p.add_argument("--payloads", type=int, default=1000)
    p.add_argument("--occlusion", type=_csv_floats, default=None,
                   help="comma-separated occluded fractions to sweep")
    p.add_argument("--occlusion-trials", type=int, default=200)
    p.add_argument("--speeds", type=_csv_floats, default=None,
                   help="comma-separated speeds (px/slot) to sweep")
    p.add_argument("--speed-trials", type=int, default=50)
    p.add_argument("--noise-rate", type=float, default=0.0,
                   help="ambient noise events per pixel per second")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_codec_test)
    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (bench_mod.ConfigError, bench_mod.CheckpointError) as e:
        return _fail(str(e))
    except FileNotFoundError as e:
        return _fail(f"file not found: {e.filename or e}")


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
