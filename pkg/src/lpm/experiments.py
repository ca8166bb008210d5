"""Named experiment presets and the run/benchmark drivers behind the CLI.

Preset interpretations:

``t10_single``
    Phasor model, two blocks plus readout shift at T=10 (50 phases). Two
    blocks is the only depth for which the parameter formula gives 50.
``n32_phasor``
    One block at T=32 with no readout shift (64 phases), trained on the
    shared N=32 split.
``n32_attention``
    Dense attention baseline (3329 floats) on the same split, Adam at 1e-3.
``d3_rollout``
    Three blocks plus readout shift at T=16 (112 phases). Scored on one-step
    test error and on a 20-step free-running rollout from held-out prompts
    against the noiseless continuation.

Every preset trains full batch for 100 epochs; readout thread 0, amplitude
normalisation encoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from . import checkpoint
from .attention import AttentionModel, AttnConfig
from .complexity import measure
from .data import BENCHMARKS, DatasetSplit, GenSpec, build_split, stack
from .phasor import LpmConfig, PhasorModel
from .training import MetricsRecord, TrainConfig, evaluate, rollout, train

ROLLOUT_STEPS = 20


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    benchmark: str
    model: str
    model_config: dict
    train: TrainConfig = field(default_factory=TrainConfig)
    gen_spec: GenSpec | None = None  # None uses the benchmark's generator
    rollout_steps: int = 0
    run_id: str | None = None

    def __post_init__(self):
        if self.model not in checkpoint.MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model!r}")
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"unknown benchmark {self.benchmark!r}")
        if self.rollout_steps < 0:
            raise ValueError("rollout_steps must be >= 0")

    @property
    def resolved_spec(self) -> GenSpec:
        return self.gen_spec or BENCHMARKS[self.benchmark].spec

    @property
    def resolved_run_id(self) -> str:
        return self.run_id or f"{self.name}-seed{self.train.seed}"

    def build_model(self):
        return checkpoint.MODEL_KINDS[self.model].from_config_dict(self.model_config)

    def build_data(self) -> DatasetSplit:
        b = BENCHMARKS[self.benchmark]
        return build_split(self.benchmark, self.resolved_spec, b.context_len, b.horizon, b.counts)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, train=replace(self.train, seed=seed))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "benchmark": self.benchmark,
            "model": self.model,
            "model_config": dict(self.model_config),
            "train": self.train.to_dict(),
            "gen_spec": self.resolved_spec.to_dict(),
            "rollout_steps": self.rollout_steps,
            "run_id": self.resolved_run_id,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment fields {sorted(unknown)}")
        d = dict(d)
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        if d.get("gen_spec") is not None:
            d["gen_spec"] = GenSpec.from_dict(d["gen_spec"])
        return cls(**d)


def _phasor(T: int, D: int, readout_shift: bool) -> dict:
    return LpmConfig(context_len=T, depth=D, readout_shift=readout_shift).to_dict()


PRESETS: dict[str, ExperimentConfig] = {
    "t10_single": ExperimentConfig("t10_single", "t10_single", "phasor", _phasor(10, 2, True)),
    "n32_phasor": ExperimentConfig("n32_phasor", "n32_vs_attention", "phasor", _phasor(32, 1, False)),
    "n32_attention": ExperimentConfig(
        "n32_attention", "n32_vs_attention", "attention",
        AttnConfig(context_len=32).to_dict(), TrainConfig(learning_rate=1e-3)),
    "d3_rollout": ExperimentConfig("d3_rollout", "d3_rollout", "phasor", _phasor(16, 3, True),
                                   rollout_steps=ROLLOUT_STEPS),
}


def get_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]


def constant_mean_mae(data: DatasetSplit) -> float:
    """Test MAE of always predicting the training-target mean."""
    _, y_train = stack(data.train)
    _, y_test = stack(data.test)
    return float(np.mean(np.abs(y_test - y_train.mean())))


def rollout_metrics(model, params, data: DatasetSplit, steps: int) -> dict:
    """Free-running continuation from each test prompt against the clean signal."""
    x_train, y_train = stack(data.train)
    prompts = np.stack([s.context for s in data.test])
    clean = np.stack([s.clean_future[:steps] for s in data.test])
    if clean.shape[1] < steps:
        raise ValueError(f"benchmark horizon {clean.shape[1]} shorter than {steps} rollout steps")
    preds = rollout(model, params, prompts, steps)
    err = preds - clean[:, :preds.shape[1]]
    return {
        "steps": steps,
        "completed_steps": int(preds.shape[1]),
        "rollout_mse": float(np.mean(err * err)),
        "rollout_mae": float(np.mean(np.abs(err))),
        "max_abs_prediction": float(np.max(np.abs(preds))),
        "train_amplitude": float(max(np.max(np.abs(x_train)), np.max(np.abs(y_train)))),
        "clean_variance": float(np.var(clean)),
    }


def run_experiment(cfg: ExperimentConfig, out_dir=None, timing: bool = True,
                   data: DatasetSplit | None = None):
    """Train, score and (if ``out_dir`` is given) write the run's artifacts.

    Files: ``config.json``, ``checkpoint.json``, ``metrics.json``, ``curve.csv``.
    """
    model = cfg.build_model()
    data = data if data is not None else cfg.build_data()
    params, record = train(model, data, cfg.train)
    if cfg.rollout_steps:
        record.extra["rollout"] = rollout_metrics(model, params, data, cfg.rollout_steps)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
        checkpoint.save(out / "checkpoint.json", model, params)
        (out / "metrics.json").write_text(record.to_json(timing))
        (out / "curve.csv").write_text(record.curve_csv())
    return model, params, record


def benchmark(seed: int = 0, out_dir=None, timing: bool = True,
              slopes: bool = True) -> dict:
    """Phasor vs attention on the shared N=32 split."""
    phasor_cfg = get_preset("n32_phasor").with_seed(seed)
    attn_cfg = get_preset("n32_attention").with_seed(seed)
    data = phasor_cfg.build_data()
    rows = []
    for cfg in (phasor_cfg, attn_cfg):
        sub = None if out_dir is None else Path(out_dir) / cfg.name
        model, _, record = run_experiment(cfg, sub, timing, data=data)
        row = {
            "model": model.kind,
            "param_count": model.param_count,
            "test_mse": record.test_mse,
            "test_mae": record.test_mae,
        }
        if slopes:
            row["mixing_slope"] = measure(model.kind)["slope"]
        if timing:
            row["wall_clock"] = record.wall_clock
        rows.append(row)
    report = {
        "benchmark": data.name,
        "seed": seed,
        "rows": rows,
        "param_ratio": rows[1]["param_count"] / rows[0]["param_count"],
        "constant_mean_mae": constant_mean_mae(data),
        "baseline_beats_phasor_mae": rows[1]["test_mae"] < rows[0]["test_mae"],
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "benchmark.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def metrics_from_file(path) -> MetricsRecord:
    return MetricsRecord.from_dict(json.loads(Path(path).read_text()))
