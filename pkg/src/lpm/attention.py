"""Single-layer dense self-attention encoder used as the comparison baseline.

Each scalar token is embedded to ``d_model`` features, passed through one
post-norm encoder layer (multi-head attention, then a GELU feed-forward
sublayer, each followed by residual add and layer normalisation) and read
out linearly from the last position. With ``d_model=16, heads=4, d_ff=64``
the model has 3329 trainable floats independent of the context length.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad


@dataclass(frozen=True)
class AttnConfig:
    context_len: int
    d_model: int = 16
    heads: int = 4
    d_ff: int = 64
    input_dim: int = 1
    positional_encoding: bool = False

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.context_len < 1:
            raise ValueError("context_len must be >= 1")
        if self.input_dim != 1:
            raise ValueError("only scalar tokens are supported")

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(config: AttnConfig) -> dict[str, tuple[int, ...]]:
    d, f = config.d_model, config.d_ff
    return {
        "embed.weight": (d,),
        "embed.bias": (d,),
        "attn.in_proj.weight": (3 * d, d),
        "attn.in_proj.bias": (3 * d,),
        "attn.out_proj.weight": (d, d),
        "attn.out_proj.bias": (d,),
        "norm1.weight": (d,),
        "norm1.bias": (d,),
        "ff.linear1.weight": (f, d),
        "ff.linear1.bias": (f,),
        "ff.linear2.weight": (d, f),
        "ff.linear2.bias": (d,),
        "norm2.weight": (d,),
        "norm2.bias": (d,),
        "readout.weight": (d,),
        "readout.bias": (1,),
    }


def count_params(config: AttnConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


def count_breakdown(config: AttnConfig) -> dict[str, int]:
    sizes = {k: int(np.prod(s)) for k, s in param_shapes(config).items()}

    def group(prefix):
        return sum(v for k, v in sizes.items() if k.startswith(prefix))

    return {
        "embedding": group("embed."),
        "attention": group("attn."),
        "norms": group("norm"),
        "feed_forward": group("ff."),
        "readout": group("readout."),
        # weight matrices only, as in the usual per-block scaling tables
        "token_mixing_weights": sizes["attn.in_proj.weight"] + sizes["attn.out_proj.weight"],
        "feed_forward_weights": sizes["ff.linear1.weight"] + sizes["ff.linear2.weight"],
    }


_FAN_IN = {
    "embed": lambda c: c.input_dim,
    "attn.in_proj": lambda c: c.d_model,
    "attn.out_proj": lambda c: c.d_model,
    "ff.linear1": lambda c: c.d_model,
    "ff.linear2": lambda c: c.d_ff,
    "readout": lambda c: c.d_model,
}


def init_params(config: AttnConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norms start at identity."""
    params = {}
    for name, shape in param_shapes(config).items():
        prefix = name.rsplit(".", 1)[0]
        if prefix.startswith("norm"):
            params[name] = np.ones(shape) if name.endswith("weight") else np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(_FAN_IN[prefix](config))
            params[name] = rng.uniform(-bound, bound, shape)
    return params


def sinusoidal_encoding(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    rates = 1.0 / 10000 ** (np.arange(0, d, 2) / d)
    pe = np.zeros((n, d))
    pe[:, 0::2] = np.sin(pos * rates)
    pe[:, 1::2] = np.cos(pos * rates)
    return pe


def _linear(h, weight, bias):
    return ad.add(ad.matmul(h, ad.swapaxes(weight, -1, -2)), bias)


def attention_weights(q, k):
    """Row-stochastic map ``softmax(q k^T / sqrt(d_k))`` over the last two axes."""
    d_k = ad.value(q).shape[-1]
    return ad.softmax(ad.scale(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / np.sqrt(d_k)))


def stack_shape(params: Mapping, config: AttnConfig) -> tuple[int, ...]:
    """Leading shape shared by every parameter array; ``()`` for a single model.

    A non-empty stack evaluates several parameter sets at once, e.g. all
    finite-difference perturbations of one point.
    """
    lead = None
    for name, shape in param_shapes(config).items():
        got = np.shape(ad.value(params[name]))
        k = len(got) - len(shape)
        if k < 0 or got[k:] != shape or (lead is not None and got[:k] != lead):
            raise ad.ShapeError("attention_forward", [got, shape], name)
        lead = got[:k]
    return lead


def attention_forward(x, params: Mapping, config: AttnConfig, weights_out: list | None = None):
    """Predict the next value for each window in ``x[B, N]`` (or a single ``x[N]``).

    With stacked parameters of leading shape ``S`` the result has shape ``S + (B,)``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] < 1:
        raise ad.ShapeError("attention_forward", [x.shape], "expected (batch, tokens)")
    lead = stack_shape(params, config)
    B, N = x.shape
    d, H, dk = config.d_model, config.heads, config.d_k

    def p(name, gap):
        # insert broadcast axes between the stack and the parameter's own shape
        v = params[name]
        if not lead:
            return v
        return ad.reshape(v, lead + (1,) * gap + param_shapes(config)[name])

    h = ad.add(ad.mul(x[..., None], p("embed.weight", 2)), p("embed.bias", 2))
    if config.positional_encoding:
        h = ad.add(h, sinusoidal_encoding(N, d))

    qkv = _linear(h, p("attn.in_proj.weight", 1), p("attn.in_proj.bias", 2))

    def heads(t):
        return ad.swapaxes(ad.reshape(t, lead + (B, N, H, dk)), -2, -3)

    q, k, v = (heads(qkv[..., i * d:(i + 1) * d]) for i in range(3))
    w = attention_weights(q, k)
    if weights_out is not None:
        weights_out.append(ad.value(w))
    mixed = ad.reshape(ad.swapaxes(ad.matmul(w, v), -2, -3), lead + (B, N, d))
    attn = _linear(mixed, p("attn.out_proj.weight", 1), p("attn.out_proj.bias", 2))

    h1 = ad.layer_norm(ad.add(h, attn), p("norm1.weight", 2), p("norm1.bias", 2))
    ff = _linear(ad.gelu(_linear(h1, p("ff.linear1.weight", 1), p("ff.linear1.bias", 2))),
                 p("ff.linear2.weight", 1), p("ff.linear2.bias", 2))
    h2 = ad.layer_norm(ad.add(h1, ff), p("norm2.weight", 2), p("norm2.bias", 2))

    last = h2[..., N - 1, :]
    readout = ad.matmul(last, ad.reshape(params["readout.weight"], lead + (d, 1)))
    out = ad.add(ad.reshape(readout, lead + (B,)), params["readout.bias"])
    return out[..., 0] if single else out


def attention_mixing(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Token mixing alone, ``softmax(q k^T / sqrt(d_k)) v``, in plain numpy."""
    s = q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1])
    s = np.exp(s - s.max(axis=-1, keepdims=True))
    s /= s.sum(axis=-1, keepdims=True)
    return s @ v


class AttentionModel:
    kind = "attention"
    stackable = True  # predict accepts parameters with a shared leading stack axis

    def __init__(self, config: AttnConfig):
        self.config = config

    @property
    def context_len(self) -> int:
        return self.config.context_len

    @property
    def param_count(self) -> int:
        return count_params(self.config)

    def init_params(self, rng, init_range=None):
        return init_params(self.config, rng)

    def predict(self, params, x, trace=None):
        return attention_forward(x, params, self.config)

    def config_dict(self) -> dict:
        return self.config.to_dict()

    def params_to_json(self, params: Mapping) -> dict:
        return {name: {"shape": list(shape), "data": [float(v) for v in np.ravel(params[name])]}
                for name, shape in param_shapes(self.config).items()}

    def params_from_json(self, doc: Mapping) -> dict[str, np.ndarray]:
        out = {}
        for name, shape in param_shapes(self.config).items():
            seg = doc[name]
            if tuple(seg["shape"]) != shape:
                raise ValueError(f"{name}: checkpoint shape {seg['shape']} != {list(shape)}")
            out[name] = np.array(seg["data"], dtype=np.float64).reshape(shape)
        return out

    @classmethod
    def from_config_dict(cls, d: Mapping) -> "AttentionModel":
        return cls(AttnConfig(**d))
