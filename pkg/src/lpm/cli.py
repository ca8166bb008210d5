"""Command-line entry point: ``lpm <command> [options]``.

Commands write their artifacts below the output root (``--out``, else the
``LPM_OUT`` environment variable, else ``./runs``) and print a JSON summary
to stdout. Any structured error exits with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checkpoint
from .autodiff import AutodiffError
from .data import BENCHMARKS, GenSpec, build_split, generate_series, read_dataset, resolve_benchmark, write_dataset
from .experiments import PRESETS, ExperimentConfig, benchmark, get_preset, run_experiment
from .gradcheck import build_model, run_gradcheck
from .training import TrainingError, evaluate, rollout

log = logging.getLogger("lpm")

DEFAULT_OUT = "runs"
OUT_ENV = "LPM_OUT"


def _out_root(args) -> Path:
    return Path(getattr(args, "out", None) or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _seed(args, default: int | None = None) -> int | None:
    return getattr(args, "seed", default)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _write_json(path: Path, doc: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    name = resolve_benchmark(args.preset)
    b = BENCHMARKS[name]
    spec = b.spec
    if getattr(args, "config", None):
        spec = GenSpec.from_dict({**spec.to_dict(), **_read_json(args.config)})
    if _seed(args) is not None:
        spec = replace(spec, seed=_seed(args))
    data = build_split(name, spec, b.context_len, b.horizon, b.counts)
    csv_path, meta_path = write_dataset(data, _out_root(args))
    _emit({"csv": str(csv_path), "meta": str(meta_path), "context_len": data.context_len,
           "counts": dict(zip(("train", "val", "test"), data.counts))})
    return 0


def _experiment(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_dict(_read_json(args.config))
    elif args.experiment:
        cfg = get_preset(args.experiment)
    else:
        raise ValueError("train needs --experiment or --config")
    if _seed(args) is not None:
        cfg = cfg.with_seed(_seed(args))
    return cfg


def cmd_train(args) -> int:
    cfg = _experiment(args)
    out_dir = _out_root(args) / cfg.resolved_run_id
    model, params, record = run_experiment(cfg, out_dir, timing=not getattr(args, "no_timing", False))
    summary = {
        "run_dir": str(out_dir),
        "model": model.kind,
        "param_count": checkpoint.count_floats(params),
        "final_train_loss": record.train_curve[-1],
        "test_mse": record.test_mse,
        "test_mae": record.test_mae,
    }
    if "rollout" in record.extra:
        summary["rollout"] = record.extra["rollout"]
    _emit(summary)
    return 0


def cmd_eval(args) -> int:
    model, params = checkpoint.load(args.checkpoint)
    data = read_dataset(args.dataset)
    samples = data.split(args.split)
    if model.context_len != data.context_len:
        raise ValueError(f"checkpoint context {model.context_len} != dataset context {data.context_len}")
    metrics = {"split": args.split, "n": len(samples), **evaluate(model, params, samples)}
    _write_json(_out_root(args) / "eval.json", metrics)
    _emit(metrics)
    return 0


def _rollout_rows(model, params, args):
    if args.prompt is not None:
        context = np.array([float(v) for v in args.prompt.split(",")])
        if context.shape != (model.context_len,):
            raise ValueError(f"prompt has {context.size} values, model expects {model.context_len}")
        return rollout(model, params, context, args.steps), None
    if not args.dataset:
        raise ValueError("rollout needs --dataset or --prompt")
    data = read_dataset(args.dataset)
    samples = data.split(args.split)
    if not 0 <= args.index < len(samples):
        raise ValueError(f"index {args.index} outside split of {len(samples)} samples")
    s = samples[args.index]
    # the clean signal is deterministic given the series draw, so extend it as needed
    spec = replace(data.spec, series_len=s.start + data.context_len + args.steps)
    _, clean = generate_series(spec, s.series_id, return_clean=True)
    ref = clean[s.start + data.context_len:]
    return rollout(model, params, s.context, args.steps), ref


def cmd_rollout(args) -> int:
    model, params = checkpoint.load(args.checkpoint)
    preds, ref = _rollout_rows(model, params, args)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "predicted", "clean_reference"])
    for k, p in enumerate(preds):
        writer.writerow([k + 1, repr(float(p)), "" if ref is None else repr(float(ref[k]))])
    path = _out_root(args) / "rollout.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    _emit({"csv": str(path), "steps": len(preds), "requested_steps": args.steps})
    return 0


def cmd_benchmark(args) -> int:
    if resolve_benchmark(args.preset) != "n32_vs_attention":
        raise ValueError("the comparison benchmark is defined on the n32 split only")
    seed = _seed(args, 0)
    out_dir = _out_root(args) / f"benchmark-n32-seed{seed}"
    report = benchmark(seed=seed, out_dir=out_dir, timing=not getattr(args, "no_timing", False),
                       slopes=not args.skip_slopes)
    _emit(report)
    return 0


def cmd_check_grads(args) -> int:
    model = build_model(args.model, args.T, args.D)
    report = run_gradcheck(model, points=args.points, seed=_seed(args, 0))
    _write_json(_out_root(args) / f"check_grads_{model.kind}.json", report)
    _emit(report)
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# parser


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS defaults let the flags appear before or after the subcommand
    # without the subparser overwriting a value given to the main parser.
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed override")
    g.add_argument("--out", default=argparse.SUPPRESS, help=f"output root (env {OUT_ENV})")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    g.add_argument("--no-timing", action="store_true", default=argparse.SUPPRESS,
                   help="omit wall-clock fields so outputs are byte-stable")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="lpm", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a benchmark dataset as CSV + JSON")
    p.add_argument("--preset", required=True, help=f"one of {sorted(BENCHMARKS)} or t10/n32/d3")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train a preset or a config file")
    p.add_argument("--experiment", choices=sorted(PRESETS))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="dataset CSV (sidecar JSON alongside)")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", parents=[common], help="autoregressive continuation to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--dataset", help="dataset CSV providing the prompt and clean reference")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--index", type=int, default=0, help="sample index within the split")
    p.add_argument("--prompt", help="comma-separated context values instead of a dataset sample")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("benchmark", parents=[common], help="phasor vs attention on the N=32 split")
    p.add_argument("--preset", default="n32")
    p.add_argument("--skip-slopes", action="store_true", help="do not time the mixing step")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("check-grads", parents=[common], help="analytic vs finite-difference gradients")
    p.add_argument("--model", choices=("phasor", "attention", "baseline"), default="phasor")
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--points", type=int, default=10)
    p.set_defaults(func=cmd_check_grads)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AutodiffError, TrainingError, checkpoint.CheckpointError,
            ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
