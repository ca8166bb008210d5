"""Analytic gradients against central finite differences.

Points for the phasor model are resampled until they sit away from the
non-smooth spots of the forward map: fold kinks (``|cos phi| <= 0.1``), the
origin (``|z| <= 1e-3``) and the ``±pi`` cut of the readout argument.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .attention import AttentionModel, AttnConfig
from .phasor import LpmConfig, PhasorModel
from .training import loss_and_grad, loss_value

TOLERANCE = 1e-4
STEP = 1e-5
COS_MARGIN = 0.1
MOD_MARGIN = 1e-3
CUT_MARGIN = 0.1


def central_difference(f: Callable[[Mapping[str, np.ndarray]], float],
                       params: Mapping[str, np.ndarray], h: float = STEP) -> dict[str, np.ndarray]:
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            bumped = dict(params)
            for sign in (1.0, -1.0):
                q = p.copy()
                q[idx] += sign * h
                bumped[name] = q
                g[idx] += sign * f(bumped)
            g[idx] /= 2 * h
        grads[name] = g
    return grads


def stacked_central_difference(predict: Callable, params: Mapping[str, np.ndarray], y: np.ndarray,
                               h: float = STEP, chunk: int = 64) -> dict[str, np.ndarray]:
    """MSE-loss central differences for models that accept stacked parameter sets.

    Each chunk of coordinates is evaluated as one stack of perturbed copies,
    which removes the per-call overhead of ``2 * n_params`` separate forwards.
    """
    coords = [(name, idx) for name, p in params.items() for idx in np.ndindex(p.shape)]
    grads = {name: np.zeros_like(p) for name, p in params.items()}
    for c0 in range(0, len(coords), chunk):
        part = coords[c0:c0 + chunk]
        n = 2 * len(part)
        stacked = {name: np.repeat(p[None], n, axis=0) for name, p in params.items()}
        for j, (name, idx) in enumerate(part):
            stacked[name][(2 * j,) + idx] += h
            stacked[name][(2 * j + 1,) + idx] -= h
        err = np.asarray(predict(stacked)) - y
        losses = np.mean(err * err, axis=-1)
        for j, (name, idx) in enumerate(part):
            grads[name][idx] = (losses[2 * j] - losses[2 * j + 1]) / (2 * h)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm error scaled by the larger of the two gradients' max norms."""
    denom = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / denom)


def smooth_point(model: PhasorModel, params, x) -> bool:
    trace: list = []
    model.predict(params, x, trace=trace)
    for kind, z, phase in trace:
        if np.any(np.abs(z) <= MOD_MARGIN):
            return False
        if kind == "pullback_input" and np.any(np.abs(np.cos(phase)) <= COS_MARGIN):
            return False
        if kind == "readout" and np.any(np.pi - np.abs(phase) <= CUT_MARGIN):
            return False
    return True


def _draw_point(model, rng: np.random.Generator, batch: int):
    T = model.context_len
    if isinstance(model, PhasorModel):
        for _ in range(10_000):
            params = model.init_params(rng, np.pi)
            x = rng.normal(size=(batch, T))
            if smooth_point(model, params, x):
                return params, x
        raise RuntimeError("no smooth sample point found")
    return model.init_params(rng), rng.normal(size=(batch, T))


def check_point(model, params, x, y, h: float = STEP) -> dict[str, float]:
    _, analytic = loss_and_grad(model, params, x, y)
    if getattr(model, "stackable", False):
        numeric = stacked_central_difference(lambda p: model.predict(p, x), params, y, h)
    else:
        numeric = central_difference(lambda p: loss_value(model, p, x, y), params, h)
    return {name: relative_error(analytic[name], numeric[name]) for name in params}


def run_gradcheck(model, points: int = 10, seed: int = 0, batch: int = 3,
                  h: float = STEP, tolerance: float = TOLERANCE) -> dict:
    """Per-group worst relative error over ``points`` random parameter points."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    for _ in range(points):
        params, x = _draw_point(model, rng, batch)
        y = rng.normal(size=batch)
        for name, err in check_point(model, params, x, y, h).items():
            worst[name] = max(worst.get(name, 0.0), err)
    max_err = max(worst.values())
    return {
        "model": model.kind,
        "config": model.config_dict(),
        "points": points,
        "step": h,
        "tolerance": tolerance,
        "groups": worst,
        "max_rel_err": max_err,
        "passed": bool(max_err < tolerance),
    }


def build_model(kind: str, T: int, D: int = 1):
    if kind == "phasor":
        return PhasorModel(LpmConfig(context_len=T, depth=D, readout_shift=True))
    if kind in ("attention", "baseline"):
        return AttentionModel(AttnConfig(context_len=T))
    raise ValueError(f"unknown model {kind!r}")
