"""Command-line entry point: run a detection sweep and write CSV metrics."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import detect
from .harness import DETECTORS, SimulationConfig, attacked_deployment, emit_csv, prepare_trial, \
    run_experiment
from .network import AttackSpec
from .radio import EXACT, GAUSSIAN, KINDS, NoiseModel
from .registry import save

DEFAULT_COUNTS = (0, 5, 10, 15, 20)


def _positive_int(minimum):
    def parse(text):
        value = int(text)
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}")
        return value
    return parse


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="anchorwatch",
        description="Simulate cheating anchor nodes and measure how well trilateration "
                    "consistency, maximum likelihood and Mahalanobis screening catch them.")
    p.add_argument("--area-width", type=float, default=600.0, help="meters (default 600)")
    p.add_argument("--area-height", type=float, default=600.0, help="meters (default 600)")
    p.add_argument("--nodes", type=_positive_int(4), default=117, help="anchor count, >= 4")
    p.add_argument("--malicious", type=_positive_int(0), action="append",
                   help="number of compromised anchors; repeat for a sweep "
                        f"(default {' '.join(map(str, DEFAULT_COUNTS))})")
    p.add_argument("--trials", type=_positive_int(1), default=50)
    p.add_argument("--seed", type=int, default=1, help="master seed")
    p.add_argument("--detector", choices=DETECTORS + ("all",), default="all")
    p.add_argument("--noise-kind", choices=KINDS, default=GAUSSIAN)
    p.add_argument("--noise-sigma", type=_nonneg_float, default=0.5,
                   help="meters for gaussian_additive, dB for log_normal_shadowing")
    p.add_argument("--eps", type=_nonneg_float, default=detect.EPS,
                   help="consistency tolerance in meters")
    p.add_argument("--threshold", type=float, default=detect.MAHALANOBIS_THRESHOLD,
                   help="Mahalanobis distance threshold")
    p.add_argument("--offset-min", type=_nonneg_float, default=20.0)
    p.add_argument("--offset-max", type=_nonneg_float, default=100.0)
    p.add_argument("--jitter-samples", type=_positive_int(3), default=detect.JITTER_SAMPLES)
    p.add_argument("--out", default="results.csv", help="CSV output path")
    p.add_argument("--refs", help="also write the trial-0 reference store here")
    p.add_argument("--dump-deployment", help="also write the trial-0 attacked deployment here")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> SimulationConfig:
    kind = EXACT if args.noise_sigma == 0 else args.noise_kind
    return SimulationConfig(
        area_width=args.area_width, area_height=args.area_height, node_count=args.nodes,
        trials=args.trials, master_seed=args.seed,
        noise=NoiseModel(kind=kind, sigma=args.noise_sigma),
        attack=AttackSpec(0, args.offset_min, args.offset_max),
        detector=args.detector, eps=args.eps, threshold=args.threshold,
        jitter_samples=args.jitter_samples, out=args.out, refs=args.refs,
        dump_deployment=args.dump_deployment)


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    counts = args.malicious or list(DEFAULT_COUNTS)
    try:
        cfg = config_from_args(args)
        if max(counts) > cfg.node_count:
            raise ValueError(f"--malicious {max(counts)} exceeds --nodes {cfg.node_count}")
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if cfg.refs:
            save(prepare_trial(cfg, 0)[1], cfg.refs)
        if cfg.dump_deployment:
            first = replace(cfg, attack=replace(cfg.attack, count=counts[0]))
            attacked_deployment(first, 0).dump(cfg.dump_deployment)
        agg = run_experiment(cfg, counts)
        emit_csv(agg, cfg.out)
    except Exception as exc:  # reported, not re-raised: exit status carries the failure
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_main())
