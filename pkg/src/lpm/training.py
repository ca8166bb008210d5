"""Adam, training loop, metrics and autoregressive rollout for either model.

A model is any object with ``init_params(rng, init_range)``,
``predict(params, x)``, ``param_count`` and ``kind``; see
:class:`lpm.phasor.PhasorModel` and :class:`lpm.attention.AttentionModel`.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .data import DatasetSplit, SequenceSample, stack

log = logging.getLogger(__name__)

LOSSES = {"mse": ad.mse_loss, "mae": ad.mae_loss}


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int | None = None):
        self.epoch = epoch
        super().__init__(message if epoch is None else f"epoch {epoch}: {message}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int | None = None  # None means full batch
    init_range: float = math.pi / 10
    seed: int = 0
    loss: str = "mse"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    divergence_factor: float = 1e3

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState, config: TrainConfig) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update. Returns new parameter arrays; ``state`` is updated in place."""
    if set(params) != set(grads):
        raise ValueError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
    for name, g in grads.items():
        if np.shape(g) != np.shape(params[name]):
            raise ValueError(f"{name}: gradient shape {np.shape(g)} != parameter shape {np.shape(params[name])}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name}")

    b1, b2 = config.beta1, config.beta2
    state.step += 1
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    new = {}
    for name, p in params.items():
        g = grads[name]
        m = b1 * state.m.get(name, np.zeros_like(p)) + (1.0 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(p)) + (1.0 - b2) * (g * g)
        state.m[name], state.v[name] = m, v
        new[name] = p - config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    return new, state


@dataclass
class MetricsRecord:
    model: str
    param_count: int
    epochs: int
    train_curve: list[float]
    val_mse: float | None = None
    val_mae: float | None = None
    test_mse: float | None = None
    test_mae: float | None = None
    wall_clock: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_clock")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    def curve_csv(self) -> str:
        rows = ["epoch,loss"] + [f"{e},{v!r}" for e, v in enumerate(self.train_curve)]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsRecord":
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__ if k in d})


def loss_and_grad(model, params: Mapping[str, np.ndarray], x: np.ndarray, y: np.ndarray,
                  loss: str = "mse") -> tuple[float, dict[str, np.ndarray]]:
    tape = ad.Tape()
    leaves = {name: tape.leaf(p, name) for name, p in params.items()}
    L = LOSSES[loss](model.predict(leaves, x), y)
    grads = tape.gradient(L, list(leaves.values()))
    return float(L.value), dict(zip(leaves, grads))


def loss_value(model, params, x, y, loss: str = "mse") -> float:
    return float(LOSSES[loss](model.predict(params, x), y))


def evaluate(model, params, samples: list[SequenceSample]) -> dict[str, float]:
    x, y = stack(samples)
    err = np.asarray(model.predict(params, x)) - y
    return {"mse": float(np.mean(err * err)), "mae": float(np.mean(np.abs(err)))}


def train(model, data: DatasetSplit, config: TrainConfig,
          audit: set | None = None) -> tuple[dict[str, np.ndarray], MetricsRecord]:
    """Fit ``model`` on ``data.train``; val and test are only scored at the end.

    ``audit``, if given, collects the series ids of every sample used in a
    gradient computation.
    """
    start = time.perf_counter()
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    params = model.init_params(np.random.default_rng(init_seq), config.init_range)
    shuffle_rng = np.random.default_rng(shuffle_seq)

    x, y = stack(data.train)
    ids = np.array([s.series_id for s in data.train])
    held_out = {s.series_id for s in data.test}
    if held_out.intersection(ids.tolist()):
        raise TrainingError("training split shares series with the test split")

    def grad_on(idx):
        batch_ids = ids[idx]
        assert not held_out.intersection(batch_ids.tolist()), "test sample reached a gradient"
        if audit is not None:
            audit.update(batch_ids.tolist())
        return loss_and_grad(model, params, x[idx], y[idx], config.loss)

    state = AdamState()
    n = len(y)
    full = config.batch_size is None or config.batch_size >= n
    curve: list[float] = []
    for epoch in range(config.epochs):
        try:
            if full:
                loss_now, grads = grad_on(np.arange(n))
                curve.append(loss_now)
                _check_divergence(curve, epoch, config.divergence_factor)
                params, state = adam_step(params, grads, state, config)
            else:
                if epoch == 0:
                    curve.append(loss_value(model, params, x, y, config.loss))
                order = shuffle_rng.permutation(n)
                for b in range(0, n, config.batch_size):
                    _, grads = grad_on(order[b:b + config.batch_size])
                    params, state = adam_step(params, grads, state, config)
                curve.append(loss_value(model, params, x, y, config.loss))
                _check_divergence(curve, epoch + 1, config.divergence_factor)
        except ad.AutodiffError as exc:
            raise TrainingError(str(exc), epoch) from exc
    if full or not curve:
        curve.append(loss_value(model, params, x, y, config.loss))
    _check_divergence(curve, config.epochs, config.divergence_factor)

    record = MetricsRecord(model=model.kind, param_count=model.param_count,
                           epochs=config.epochs, train_curve=curve)
    if data.val:
        m = evaluate(model, params, data.val)
        record.val_mse, record.val_mae = m["mse"], m["mae"]
    if data.test:
        m = evaluate(model, params, data.test)
        record.test_mse, record.test_mae = m["mse"], m["mae"]
    record.wall_clock = time.perf_counter() - start
    return params, record


def _check_divergence(curve: list[float], epoch: int, factor: float = 1e3) -> None:
    last = curve[-1]
    if not math.isfinite(last):
        raise TrainingError("loss is not finite", epoch)
    if last > factor * curve[0]:
        raise TrainingError(f"loss diverged ({last:.4g} vs initial {curve[0]:.4g})", epoch)


def rollout(model, params, context, steps: int) -> np.ndarray:
    """Feed predictions back into a sliding window.

    ``context`` is ``(T,)`` or a batch ``(n, T)``; the result has ``steps``
    columns unless a non-finite prediction truncates it.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    window = np.array(context, dtype=np.float64)
    single = window.ndim == 1
    if single:
        window = window[None, :]
    preds = []
    for k in range(steps):
        p = np.asarray(model.predict(params, window), dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(p)):
            log.warning("rollout truncated at step %d: non-finite prediction", k)
            break
        preds.append(p)
        window = np.concatenate([window[:, 1:], p[:, None]], axis=1)
    out = np.stack(preds, axis=1) if preds else np.zeros((window.shape[0], 0))
    return out[0] if single else out
