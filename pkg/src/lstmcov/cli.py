"""Command-line front end.

Three modes:

* test   — run a mutation campaign against a model and dataset, writing the
           record log, summary JSON, CSV series, suite JSON, and figures;
* trace  — dump the internal trace (gates, cell and hidden states, logits)
           of one dataset input, or logits for all inputs, as JSON on stdout;
* report — re-export summary, CSV series, and figures from an existing
           record log.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from .coverage import CoverageConfig
from .datasets import DatasetError, load_idx_images, load_idx_labels, load_json_dataset
from .harness import CampaignConfig, CountStop, CoverageStop, run_campaign
from .model import ModelError, ModelSpec, load_model, run_forward
from .mutation import MutationConfig
from .oracle import OracleConfig
from .reporting import export, parse_log

__all__ = ["build_parser", "parse_and_run", "main"]

OUTPUT_DIR_ENV = "LSTMCOV_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "log_folder"


class UsageError(Exception):
    pass


def _pair(text: str, caster, flag: str) -> tuple:
    raw = text.strip()
    if raw.startswith("[") and raw.endswith("]"):
        raw = raw[1:-1]
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise UsageError(f"{flag} expects two comma-separated values, got {text!r}")
    try:
        return caster(parts[0]), caster(parts[1])
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lstmcov",
        description="Coverage-guided testing for LSTM classifiers.",
    )
    p.add_argument("--mode", choices=["test", "trace", "report"], default="test",
                   help="test: run a campaign; trace: dump one input's internal states; "
                        "report: re-export files from a record log (default: test)")
    p.add_argument("--model", help="model weight file (JSON)")
    p.add_argument("--dataset", help="dataset: IDX image file (optionally .gz) or JSON")
    p.add_argument("--labels", help="IDX label file (optional, shown by trace mode)")
    p.add_argument("--output",
                   help=f"record log path (default: $" + OUTPUT_DIR_ENV +
                        f" or {DEFAULT_OUTPUT_DIR}/, file record.txt)")
    p.add_argument("--TestCaseNum", type=int, default=None,
                   help="stop after this many valid test cases (default 2000)")
    p.add_argument("--coverageStop", default=None, metavar="METRIC:RATE",
                   help="stop when a coverage metric reaches a rate, e.g. cell:0.9 "
                        "(metrics: cell, gate, seq_pos, seq_neg)")
    p.add_argument("--threshold_CC", type=float, default=6.0,
                   help="cell coverage threshold on the stepwise hidden-state change "
                        "(default 6)")
    p.add_argument("--threshold_GC", type=float, default=0.85,
                   help="gate coverage threshold on the mean forget-gate value (default 0.85)")
    p.add_argument("--symbols_SQ", type=int, default=2,
                   help="number of symbols for sequence coverage, 2..26 (default 2)")
    p.add_argument("--seq", default=None, metavar="LO,HI",
                   help="1-based inclusive timestep range for sequence patterns, "
                        "e.g. 19,24 or [19,24] (default: the whole sequence)")
    p.add_argument("--layer", type=int, default=None,
                   help="1-based LSTM layer the coverage metrics observe (default: last)")
    p.add_argument("--minimalTest", type=int, choices=[0, 1], default=0,
                   help="1: reduce the suite to a greedy minimal set cover (default 0)")
    p.add_argument("--oracleRadius", type=float, default=0.1,
                   help="Euclidean norm-ball radius for mutant validity (default 0.1)")
    p.add_argument("--epsilonRange", default="0.01,0.1", metavar="LO,HI",
                   help="gradient magnitude range for mutation (default 0.01,0.1)")
    p.add_argument("--tauRange", default="1,5", metavar="LO,HI",
                   help="gradient step-count range for mutation (default 1,5)")
    p.add_argument("--clamp", default="0,1", metavar="LO,HI",
                   help="valid per-feature interval mutants are clamped to (default 0,1)")
    p.add_argument("--seedsRNG", type=int, default=0,
                   help="seed for the input-seed selection stream (default 0)")
    p.add_argument("--mutationRNG", type=int, default=0,
                   help="seed for the mutation parameter streams (default 0)")
    p.add_argument("--seedCount", type=int, default=None,
                   help="how many dataset inputs to use as seeds "
                        "(default: min(100, dataset size))")
    p.add_argument("--mutationsPerSeed", type=int, default=5,
                   help="mutants generated per seed visit (default 5)")
    p.add_argument("--workers", type=int, default=1,
                   help="worker threads; never changes results (default 1)")
    p.add_argument("--figures", type=int, choices=[0, 1], default=1,
                   help="1: render PNG figures next to the report files (default 1)")
    p.add_argument("--index", default=None,
                   help="trace mode: dataset index to trace, or 'all' for logits of "
                        "every input")
    return p


def _default_output() -> str:
    out_dir = os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)
    return os.path.join(out_dir, "record.txt")


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name} is required for --mode {args.mode}")


def _load_model(path: str) -> ModelSpec:
    if not os.path.exists(path):
        raise UsageError(f"model file not found: {path}")
    return load_model(path)


def _load_dataset(args) -> tuple[np.ndarray, Optional[np.ndarray]]:
    path = args.dataset
    if not os.path.exists(path):
        raise UsageError(f"dataset file not found: {path}")
    if path.endswith(".json"):
        return load_json_dataset(path)
    inputs = load_idx_images(path)
    labels = None
    if args.labels:
        labels = load_idx_labels(args.labels)
        if labels.shape[0] != inputs.shape[0]:
            raise DatasetError(
                f"{args.labels}: {labels.shape[0]} labels for {inputs.shape[0]} inputs"
            )
    return inputs, labels


def _campaign_config(args, model: ModelSpec) -> CampaignConfig:
    if args.coverageStop is not None and args.TestCaseNum is not None:
        raise UsageError("give either --TestCaseNum or --coverageStop, not both")
    if args.coverageStop is not None:
        metric, sep, rate = args.coverageStop.partition(":")
        if not sep:
            raise UsageError("--coverageStop expects METRIC:RATE, e.g. cell:0.9")
        try:
            stop = CoverageStop(metric=metric, rate=float(rate))
        except ValueError as e:
            raise UsageError(f"--coverageStop: {e}") from None
    else:
        count = 2000 if args.TestCaseNum is None else args.TestCaseNum
        try:
            stop = CountStop(count)
        except ValueError as e:
            raise UsageError(f"--TestCaseNum: {e}") from None

    n = model.timesteps
    if args.seq is None:
        seq_range = (1, n)
    else:
        seq_range = _pair(args.seq, int, "--seq")
    if args.layer is None:
        target_layer = -1
    else:
        if not 1 <= args.layer <= len(model.lstm_layers):
            raise UsageError(
                f"--layer must be in 1..{len(model.lstm_layers)} for this model"
            )
        target_layer = args.layer - 1
    try:
        coverage = CoverageConfig(
            alpha_h=args.threshold_CC,
            alpha_f=args.threshold_GC,
            symbol_count=args.symbols_SQ,
            seq_range=seq_range,
            target_layer=target_layer,
        )
        if seq_range[1] > n:
            raise ValueError(f"--seq range {seq_range} exceeds the model's {n} timesteps")
        mutation = MutationConfig(
            epsilon_range=_pair(args.epsilonRange, float, "--epsilonRange"),
            tau_range=_pair(args.tauRange, int, "--tauRange"),
            clamp=_pair(args.clamp, float, "--clamp"),
            rng_seed=args.mutationRNG,
        )
        oracle = OracleConfig(radius=args.oracleRadius)
        return CampaignConfig(
            stop=stop,
            coverage=coverage,
            mutation=mutation,
            oracle=oracle,
            seeds_rng=args.seedsRNG,
            seed_count=args.seedCount,
            mutations_per_seed=args.mutationsPerSeed,
            minimal_suite=bool(args.minimalTest),
            workers=args.workers,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _run_test(args) -> int:
    _require(args, "model", "dataset")
    model = _load_model(args.model)
    inputs, _ = _load_dataset(args)
    cfg = _campaign_config(args, model)
    output = args.output or _default_output()
    echo = {"mode": "test", "model": args.model, "dataset": args.dataset}
    suite, report = run_campaign(model, inputs, cfg, extra_echo=echo)
    paths = export(report, output, suite=suite)
    if args.figures:
        from .plotting import render_figures

        paths += render_figures(report, os.path.dirname(output) or ".")
    cell, gate, seq_pos, seq_neg = report.final_rates()
    print(f"status: {report.status}")
    print(f"suite size: {report.suite_size} (attempts: {report.attempts}, "
          f"valid: {report.valid_count})")
    print(f"coverage: cell {cell:.4f}  gate {gate:.4f}  "
          f"seq+ {seq_pos:.6f}  seq- {seq_neg:.6f}")
    mean = report.mean_adversarial_perturbation
    print(f"adversarial examples: {report.adversarial_count}"
          + (f", mean perturbation {mean:.6f}" if mean is not None else ""))
    for p in paths:
        print(f"wrote {p}")
    return 0


def _trace_payload(model: ModelSpec, x: np.ndarray) -> dict:
    trace = run_forward(model, x)
    return {
        "predicted_class": trace.predicted_class,
        "logits": trace.logits.tolist(),
        "layers": [
            [
                {
                    "f": step.f.tolist(),
                    "i": step.i.tolist(),
                    "o": step.o.tolist(),
                    "c": step.c.tolist(),
                    "h": step.h.tolist(),
                }
                for step in layer
            ]
            for layer in trace.layers
        ],
    }


def _run_trace(args) -> int:
    _require(args, "model", "dataset", "index")
    model = _load_model(args.model)
    inputs, labels = _load_dataset(args)
    if args.index == "all":
        logits = []
        predicted = []
        for x in inputs:
            trace = run_forward(model, x)
            logits.append(trace.logits.tolist())
            predicted.append(trace.predicted_class)
        print(json.dumps({"predicted_classes": predicted, "logits": logits}))
        return 0
    try:
        idx = int(args.index)
    except ValueError:
        raise UsageError(f"--index must be an integer or 'all', got {args.index!r}") from None
    if not 0 <= idx < len(inputs):
        raise UsageError(f"--index {idx} outside dataset of size {len(inputs)}")
    payload = {"index": idx}
    if labels is not None:
        payload["label"] = int(labels[idx])
    payload.update(_trace_payload(model, np.asarray(inputs[idx])))
    print(json.dumps(payload))
    return 0


def _run_report(args) -> int:
    output = args.output or _default_output()
    if not os.path.exists(output):
        raise UsageError(f"record log not found: {output}")
    report = parse_log(output)
    paths = export(report, output)
    if args.figures:
        from .plotting import render_figures

        paths += render_figures(report, os.path.dirname(output) or ".")
    for p in paths:
        print(f"wrote {p}")
    return 0


def parse_and_run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.mode == "test":
            return _run_test(args)
        if args.mode == "trace":
            return _run_trace(args)
        return _run_report(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ModelError, DatasetError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_run())


if __name__ == "__main__":
    main()
