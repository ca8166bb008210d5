"""Wall-clock scaling of the token-mixing step alone.

Only the sequence-coupling operation is timed: the unitary DFT for the phasor
model and ``softmax(q k^T / sqrt(d_k)) v`` for attention. Embeddings,
projections and feed-forward layers scale linearly in length for both and
are left out so the exponent reflects the mixing itself.
"""

from __future__ import annotations

import time
from typing import Callable, Sequence

import numpy as np

from .attention import attention_mixing
from .spectral import dft

LENGTHS = (64, 128, 256, 512, 1024)


def _best_time(fn: Callable[[], object], repeats: int, min_time: float) -> float:
    """Smallest per-call time over ``repeats`` rounds of at least ``min_time`` seconds."""
    fn()
    best = np.inf
    for _ in range(repeats):
        n, start = 0, time.perf_counter()
        while True:
            fn()
            n += 1
            elapsed = time.perf_counter() - start
            if elapsed >= min_time:
                break
        best = min(best, elapsed / n)
    return best


def phasor_mixer(T: int, batch: int, rng: np.random.Generator) -> Callable[[], object]:
    z = np.exp(1j * rng.uniform(-np.pi, np.pi, (batch, T)))
    return lambda: dft(z)


def attention_mixer(T: int, batch: int, rng: np.random.Generator,
                    heads: int = 4, d_k: int = 4) -> Callable[[], object]:
    q, k, v = (rng.normal(size=(batch, heads, T, d_k)) for _ in range(3))
    return lambda: attention_mixing(q, k, v)


MIXERS = {"phasor": phasor_mixer, "attention": attention_mixer}


def measure(kind: str, lengths: Sequence[int] = LENGTHS, batch: int = 4,
            repeats: int = 5, min_time: float = 0.02, seed: int = 0) -> dict:
    """Time one mixing call per length and fit ``log t = slope * log T + c``."""
    rng = np.random.default_rng(seed)
    times = [_best_time(MIXERS[kind](T, batch, rng), repeats, min_time) for T in lengths]
    slope, _ = np.polyfit(np.log(lengths), np.log(times), 1)
    return {"model": kind, "lengths": list(lengths), "seconds": times, "slope": float(slope)}
