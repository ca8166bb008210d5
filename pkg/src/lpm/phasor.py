"""Phase-native sequence model: shift gates around a unitary DFT mixer.

A window ``x`` of ``T`` real values is encoded to unit phasors
``z_t = exp(i*phi_t)``. Each block applies a trainable diagonal phase
rotation, the parameter-free unitary DFT, and a second rotation. Between
consecutive blocks the state is pulled back onto the torus through the fold
``arcsin(sin(arg z))``. The prediction is the phase of one readout thread,
mapped back through the inverse of the encoding.

All functions accept plain arrays or autodiff nodes; with nodes the
computation is recorded for differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad

ENCODINGS = ("amplitude_norm", "tanh")
ZERO_WINDOW = 1e-12


@dataclass(frozen=True)
class LpmConfig:
    context_len: int
    depth: int = 1
    readout_shift: bool = True
    readout_thread: int = 0
    encoding: str = "amplitude_norm"
    pullback_between_blocks: bool = True

    def __post_init__(self):
        if self.context_len < 1:
            raise ValueError(f"context_len must be >= 1, got {self.context_len}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if not 0 <= self.readout_thread < self.context_len:
            raise ValueError(
                f"readout_thread {self.readout_thread} outside [0, {self.context_len})")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")

    @property
    def param_count(self) -> int:
        return count_params(self)

    def to_dict(self) -> dict:
        return {
            "T": self.context_len,
            "D": self.depth,
            "readout_shift": self.readout_shift,
            "readout_thread": self.readout_thread,
            "encoding": self.encoding,
            "pullback_between_blocks": self.pullback_between_blocks,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LpmConfig":
        return cls(
            context_len=int(d["T"]),
            depth=int(d["D"]),
            readout_shift=bool(d["readout_shift"]),
            readout_thread=int(d.get("readout_thread", 0)),
            encoding=d.get("encoding", "amplitude_norm"),
            pullback_between_blocks=bool(d.get("pullback_between_blocks", True)),
        )


def count_params(config: LpmConfig) -> int:
    """``(2D + 1) * T`` with a readout shift layer, ``2D * T`` without."""
    return (2 * config.depth + int(config.readout_shift)) * config.context_len


def param_names(config: LpmConfig) -> list[str]:
    names = []
    for i in range(config.depth):
        names += [f"block{i}.pre", f"block{i}.post"]
    if config.readout_shift:
        names.append("readout")
    return names


def init_params(config: LpmConfig, rng: np.random.Generator,
                init_range: float = np.pi / 10) -> dict[str, np.ndarray]:
    """Phases drawn uniformly from ``[-init_range, init_range]``."""
    T = config.context_len
    return {name: rng.uniform(-init_range, init_range, T) for name in param_names(config)}


def check_params(config: LpmConfig, params: Mapping) -> None:
    expected = param_names(config)
    if sorted(params) != sorted(expected):
        raise ValueError(f"parameter names {sorted(params)} do not match config {expected}")
    for name in expected:
        shape = np.shape(ad.value(params[name]))
        if shape != (config.context_len,):
            raise ValueError(f"{name}: expected shape ({config.context_len},), got {shape}")


# ---------------------------------------------------------------------------
# encoding and readout


def encode(x, encoding: str = "amplitude_norm"):
    """Map windows ``x[..., T]`` to ``(z, scale, phi)``.

    ``scale`` is the per-window ``max|x|`` (1 for an all-zero window) under
    amplitude normalisation and is all ones for the tanh variant.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ValueError("encode needs at least one value per window")
    if not np.all(np.isfinite(x)):
        raise ValueError("encode: non-finite input")
    if encoding == "amplitude_norm":
        scale = np.max(np.abs(x), axis=-1)
        scale = np.where(scale < ZERO_WINDOW, 1.0, scale)
        phi = x / scale[..., None] * (np.pi / 2)
    elif encoding == "tanh":
        scale = np.ones(x.shape[:-1])
        phi = np.pi * np.tanh(x)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    return np.exp(1j * phi), scale, phi


def decode(phi_out, scale, encoding: str = "amplitude_norm"):
    """Invert the encoding for a readout phase."""
    if encoding == "amplitude_norm":
        return ad.mul(phi_out, np.asarray(scale) / (np.pi / 2))
    if encoding == "tanh":
        # experimental: no principled inverse exists for this variant
        return ad.arctanh(ad.scale(phi_out, 1.0 / np.pi))
    raise ValueError(f"unknown encoding {encoding!r}")


# ---------------------------------------------------------------------------
# operators


def _check_len(op: str, z, theta) -> None:
    zs, ts = np.shape(ad.value(z)), np.shape(ad.value(theta))
    if len(ts) != 1 or zs[-1:] != ts:
        raise ad.ShapeError(op, [zs, ts], "phase vector must match the thread axis")


def shift(z, theta):
    """Diagonal phase rotation ``z_t * exp(i*theta_t)``."""
    _check_len("shift", z, theta)
    return ad.mul(z, ad.expi(theta))


def dft_mix(z):
    """Parameter-free unitary token mixing."""
    return ad.dft(z)


def pullback(z, trace: list | None = None):
    """Fold each thread's phase into [-pi/2, pi/2] and re-lift to unit modulus.

    Thread magnitudes are discarded. Threads with modulus below ``ad.ARG_EPS``
    carry only rounding noise in their phase and are treated as the origin,
    whose phase is 0.
    """
    raw = ad.angle(z)
    live = np.abs(ad.value(z)) >= ad.ARG_EPS
    if not live.all():
        raw = ad.mul(raw, live.astype(np.float64))
    if trace is not None:
        trace.append(("pullback_input", ad.value(z), ad.value(raw)))
    return ad.expi(ad.fold(raw))


def block(z, pre, post):
    return shift(dft_mix(shift(z, pre)), post)


def lpm_forward(x, params: Mapping, config: LpmConfig, trace: list | None = None):
    """Predict the next value for each window in ``x[..., T]``.

    ``trace``, when given, collects intermediate states for branch-cut checks.
    """
    check_params(config, params)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != config.context_len:
        raise ad.ShapeError("lpm_forward", [x.shape, (config.context_len,)])
    z, scale, _ = encode(x, config.encoding)
    for i in range(config.depth):
        if i > 0 and config.pullback_between_blocks:
            z = pullback(z, trace)
        z = block(z, params[f"block{i}.pre"], params[f"block{i}.post"])
    if config.readout_shift:
        z = shift(z, params["readout"])
    z_out = ad.take(z, config.readout_thread, axis=-1)
    phi_out = ad.angle(z_out)
    if trace is not None:
        trace.append(("readout", ad.value(z_out), ad.value(phi_out)))
    return decode(phi_out, scale, config.encoding)


class PhasorModel:
    """Binds an :class:`LpmConfig` to the trainer's model protocol."""

    kind = "phasor"

    def __init__(self, config: LpmConfig):
        self.config = config

    @property
    def context_len(self) -> int:
        return self.config.context_len

    @property
    def param_count(self) -> int:
        return count_params(self.config)

    def init_params(self, rng, init_range: float = np.pi / 10):
        return init_params(self.config, rng, init_range)

    def predict(self, params, x, trace=None):
        return lpm_forward(x, params, self.config, trace)

    def config_dict(self) -> dict:
        return self.config.to_dict()

    def params_to_json(self, params: Mapping) -> dict:
        blocks = [{"pre": _floats(params[f"block{i}.pre"]),
                   "post": _floats(params[f"block{i}.post"])}
                  for i in range(self.config.depth)]
        readout = _floats(params["readout"]) if self.config.readout_shift else None
        return {"blocks": blocks, "readout": readout}

    def params_from_json(self, doc: Mapping) -> dict[str, np.ndarray]:
        blocks = doc["blocks"]
        if len(blocks) != self.config.depth:
            raise ValueError(f"checkpoint has {len(blocks)} blocks, config depth {self.config.depth}")
        params = {}
        for i, b in enumerate(blocks):
            params[f"block{i}.pre"] = np.array(b["pre"], dtype=np.float64)
            params[f"block{i}.post"] = np.array(b["post"], dtype=np.float64)
        if self.config.readout_shift:
            if doc.get("readout") is None:
                raise ValueError("config has readout_shift but checkpoint has no readout phases")
            params["readout"] = np.array(doc["readout"], dtype=np.float64)
        check_params(self.config, params)
        return params

    @classmethod
    def from_config_dict(cls, d: Mapping) -> "PhasorModel":
        return cls(LpmConfig.from_dict(d))


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


__all__ = [
    "LpmConfig", "PhasorModel", "block", "count_params", "decode", "dft_mix",
    "encode", "init_params", "lpm_forward", "param_names", "pullback", "shift",
]
