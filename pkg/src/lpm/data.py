"""Seeded multi-frequency sequences, sliding windows and fixed splits.

Every series is a sum of ``K`` sinusoids with amplitudes, frequencies and
phases drawn fresh for that series, plus white Gaussian noise. Series ``i``
of a spec draws from ``PCG64(SeedSequence(seed, spawn_key=(i,)))``, so any
series can be regenerated independently and datasets are bit-reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenSpec:
    num_components: int = 3
    freq_range: tuple[float, float] = (0.005, 0.04)  # cycles per step
    amp_range: tuple[float, float] = (0.5, 1.5)
    noise_sigma: float = 0.1
    series_len: int = 11
    seed: int = 0

    def __post_init__(self):
        f_lo, f_hi = self.freq_range
        a_lo, a_hi = self.amp_range
        if self.num_components < 1:
            raise ValueError("num_components must be >= 1")
        if not 0 < f_lo <= f_hi:
            raise ValueError(f"invalid freq_range {self.freq_range}")
        if not 0 < a_lo <= a_hi:
            raise ValueError(f"invalid amp_range {self.amp_range}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.series_len < 1:
            raise ValueError("series_len must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["freq_range"] = list(self.freq_range)
        d["amp_range"] = list(self.amp_range)
        return d

    @classmethod
    def from_dict(cls, d) -> "GenSpec":
        d = dict(d)
        d["freq_range"] = tuple(d["freq_range"])
        d["amp_range"] = tuple(d["amp_range"])
        return cls(**d)


def series_rng(seed: int, series_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(series_id,))))


def draw_components(spec: GenSpec, rng: np.random.Generator):
    K = spec.num_components
    amps = rng.uniform(*spec.amp_range, K)
    freqs = rng.uniform(*spec.freq_range, K)
    phases = rng.uniform(0.0, 2 * np.pi, K)
    return amps, freqs, phases


def generate_series(spec: GenSpec, series_id: int = 0, return_clean: bool = False):
    """``x_t = sum_k A_k sin(2 pi f_k t + psi_k) + eps_t`` for ``t = 0..len-1``."""
    rng = series_rng(spec.seed, series_id)
    amps, freqs, phases = draw_components(spec, rng)
    t = np.arange(spec.series_len, dtype=np.float64)
    clean = np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]).T @ amps
    noisy = clean + rng.normal(0.0, spec.noise_sigma, spec.series_len)
    if return_clean:
        return noisy, clean
    return noisy


@dataclass(frozen=True)
class SequenceSample:
    context: np.ndarray
    target: float
    clean_target: float | None = None
    clean_future: np.ndarray | None = None
    series_id: int = 0
    start: int = 0


def window(series, T: int, horizon: int = 1, clean=None, series_id: int = 0) -> list[SequenceSample]:
    """Stride-1 windows: ``len(series) - T - horizon + 1`` samples.

    ``target`` is the next noisy value; ``clean_future`` keeps the noiseless
    continuation up to ``horizon`` steps when ``clean`` is given.
    """
    series = np.asarray(series, dtype=np.float64)
    if T < 1 or horizon < 1:
        raise ValueError("T and horizon must be >= 1")
    n = len(series) - T - horizon + 1
    if n < 1:
        raise ValueError(f"series of length {len(series)} too short for T={T}, horizon={horizon}")
    samples = []
    for s in range(n):
        fut = None if clean is None else np.array(clean[s + T:s + T + horizon])
        samples.append(SequenceSample(
            context=np.array(series[s:s + T]),
            target=float(series[s + T]),
            clean_target=None if fut is None else float(fut[0]),
            clean_future=fut,
            series_id=series_id,
            start=s,
        ))
    return samples


@dataclass
class DatasetSplit:
    name: str
    spec: GenSpec
    context_len: int
    horizon: int
    train: list[SequenceSample] = field(default_factory=list)
    val: list[SequenceSample] = field(default_factory=list)
    test: list[SequenceSample] = field(default_factory=list)

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def split(self, which: str) -> list[SequenceSample]:
        if which not in ("train", "val", "test"):
            raise ValueError(f"unknown split {which!r}")
        return getattr(self, which)

    def series_ids(self, which: str) -> list[int]:
        return sorted({s.series_id for s in self.split(which)})


def stack(samples: list[SequenceSample]) -> tuple[np.ndarray, np.ndarray]:
    """Contexts ``(n, T)`` and targets ``(n,)`` as arrays."""
    if not samples:
        raise ValueError("empty sample set")
    return np.stack([s.context for s in samples]), np.array([s.target for s in samples])


@dataclass(frozen=True)
class BenchmarkDef:
    context_len: int
    horizon: int
    counts: tuple[int, int, int]
    spec: GenSpec


BENCHMARKS = {
    "t10_single": BenchmarkDef(10, 1, (1000, 250, 250), GenSpec(seed=1010)),
    "n32_vs_attention": BenchmarkDef(32, 1, (1000, 0, 250), GenSpec(seed=3232)),
    # harder target: 20-step free-running continuation from a 16-step prompt
    "d3_rollout": BenchmarkDef(16, 20, (1000, 250, 250), GenSpec(seed=1616)),
}

ALIASES = {"t10": "t10_single", "n32": "n32_vs_attention", "d3": "d3_rollout"}


def resolve_benchmark(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    return name


def build_split(name: str, spec: GenSpec, context_len: int, horizon: int,
                counts: tuple[int, int, int]) -> DatasetSplit:
    """One series per sample; consecutive series ids fill train, val, test."""
    spec = replace(spec, series_len=context_len + horizon)
    out = DatasetSplit(name, spec, context_len, horizon)
    sid = 0
    for which, n in zip(("train", "val", "test"), counts):
        bucket = out.split(which)
        for _ in range(n):
            noisy, clean = generate_series(spec, sid, return_clean=True)
            bucket.extend(window(noisy, context_len, horizon, clean, series_id=sid))
            sid += 1
    return out


def make_benchmark(name: str, seed: int | None = None) -> DatasetSplit:
    name = resolve_benchmark(name)
    b = BENCHMARKS[name]
    spec = b.spec if seed is None else replace(b.spec, seed=seed)
    return build_split(name, spec, b.context_len, b.horizon, b.counts)


# ---------------------------------------------------------------------------
# CSV + JSON sidecar


def write_dataset(data: DatasetSplit, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{data.name}.csv"
    meta_path = out_dir / f"{data.name}.json"
    splits = {w: data.series_ids(w) for w in ("train", "val", "test")}
    if sum(len(v) for v in splits.values()) != sum(data.counts):
        raise ValueError("export expects exactly one window per series")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series_id", "t", "value"])
        for which in ("train", "val", "test"):
            for s in data.split(which):
                full = np.concatenate([s.context, [s.target]])
                for k, v in enumerate(full):
                    writer.writerow([s.series_id, s.start + k, repr(float(v))])
    meta = {
        "format_version": FORMAT_VERSION,
        "name": data.name,
        "gen_spec": data.spec.to_dict(),
        "context_len": data.context_len,
        "horizon": data.horizon,
        "counts": dict(zip(("train", "val", "test"), data.counts)),
        "splits": splits,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return csv_path, meta_path


def read_dataset(csv_path, meta_path=None) -> DatasetSplit:
    """Inverse of :func:`write_dataset`; clean references are regenerated from the stored GenSpec."""
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    meta = json.loads(meta_path.read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format {meta.get('format_version')}")
    spec = GenSpec.from_dict(meta["gen_spec"])
    T, h = meta["context_len"], meta["horizon"]
    values: dict[int, list[float]] = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            values.setdefault(int(row["series_id"]), []).append(float(row["value"]))
    out = DatasetSplit(meta["name"], spec, T, h)
    for which in ("train", "val", "test"):
        bucket = out.split(which)
        for sid in meta["splits"][which]:
            vals = np.array(values[sid])
            _, clean = generate_series(spec, sid, return_clean=True)
            bucket.append(SequenceSample(
                context=vals[:T], target=float(vals[T]),
                clean_target=float(clean[T]), clean_future=clean[T:T + h],
                series_id=sid, start=0,
            ))
    return out
