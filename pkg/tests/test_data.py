import json

import numpy as np
import pytest

from lpm.data import (BENCHMARKS, GenSpec, build_split, generate_series, make_benchmark, read_dataset,
                      resolve_benchmark, series_rng, stack, window, write_dataset)


def test_noiseless_single_sinusoid_is_exact():
    spec = GenSpec(num_components=1, amp_range=(1.0, 1.0), freq_range=(0.05, 0.05),
                   noise_sigma=0.0, series_len=50, seed=4)
    # degenerate ranges still consume one uniform each: amplitude, frequency, phase
    phase = series_rng(4, 0).uniform(0.0, 1.0, 3)
    x = generate_series(spec)
    t = np.arange(50)
    np.testing.assert_allclose(x, np.sin(2 * np.pi * 0.05 * t + 2 * np.pi * phase[2]), atol=1e-12)


def test_same_seed_same_series():
    spec = GenSpec(series_len=100, seed=9)
    np.testing.assert_array_equal(generate_series(spec, 3), generate_series(spec, 3))
    assert not np.array_equal(generate_series(spec, 3), generate_series(spec, 4))


def test_pinned_generator_values():
    # frozen output: any change to the PRNG, seeding or draw order breaks this
    x = generate_series(GenSpec(series_len=4, seed=0))
    np.testing.assert_array_equal(
        x, [1.0729914197788024, 0.98612869270745, 1.1768003068687065, 1.0778619347891516])


def test_draw_order():
    x = generate_series(GenSpec(series_len=4, seed=0))
    ref = series_rng(0, 0)
    amps = ref.uniform(0.5, 1.5, 3)
    freqs = ref.uniform(0.005, 0.04, 3)
    phases = ref.uniform(0, 2 * np.pi, 3)
    noise = ref.normal(0, 0.1, 4)
    t = np.arange(4)
    expected = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(0) + noise
    np.testing.assert_allclose(x, expected, atol=1e-14)


def test_noise_statistics():
    n = 100_000
    spec = GenSpec(series_len=n, noise_sigma=0.1, seed=77)
    noisy, clean = generate_series(spec, return_clean=True)
    eps = noisy - clean
    assert abs(eps.mean()) < 3 * 0.1 / np.sqrt(n)
    assert abs(eps.std() - 0.1) < 0.05 * 0.1


@pytest.mark.parametrize("kwargs", [
    {"freq_range": (0.0, 0.1)}, {"amp_range": (-1.0, 1.0)}, {"noise_sigma": -0.1},
    {"num_components": 0}, {"freq_range": (0.3, 0.1)},
])
def test_invalid_spec(kwargs):
    with pytest.raises(ValueError):
        GenSpec(**kwargs)


def test_window_example():
    series = np.arange(1.0, 13.0)
    samples = window(series, 10)
    assert len(samples) == 2
    assert [s.target for s in samples] == [11.0, 12.0]
    np.testing.assert_array_equal(samples[1].context, series[1:11])


@pytest.mark.parametrize("L, T, h", [(20, 5, 1), (20, 5, 3), (36, 16, 20), (11, 10, 1)])
def test_window_count(L, T, h):
    samples = window(np.arange(float(L)), T, h, clean=np.arange(float(L)))
    assert len(samples) == L - T - h + 1
    for s in samples:
        assert s.clean_future.shape == (h,)
        assert s.clean_target == s.target


def test_window_too_short():
    with pytest.raises(ValueError):
        window(np.arange(5.0), 5)


@pytest.mark.parametrize("name, T, counts", [
    ("t10", 10, (1000, 250, 250)), ("n32", 32, (1000, 0, 250)), ("d3", 16, (1000, 250, 250)),
])
def test_benchmark_sizes(name, T, counts):
    data = make_benchmark(name)
    assert data.counts == counts
    assert data.context_len == T
    assert all(s.context.shape == (T,) for s in data.train[:5])


def test_d3_keeps_twenty_step_clean_future():
    data = make_benchmark("d3")
    assert data.horizon == 20
    assert all(s.clean_future.shape == (20,) for s in data.test)


def test_splits_are_disjoint_by_series():
    data = make_benchmark("t10")
    ids = [set(data.series_ids(w)) for w in ("train", "val", "test")]
    assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])


def test_unknown_benchmark():
    with pytest.raises(ValueError):
        resolve_benchmark("t11")


def test_stack_empty():
    with pytest.raises(ValueError):
        stack([])


def test_csv_round_trip(tmp_path):
    spec = BENCHMARKS["t10_single"].spec
    data = build_split("small", spec, 10, 1, (20, 5, 5))
    csv_path, meta_path = write_dataset(data, tmp_path)
    meta = json.loads(meta_path.read_text())
    assert meta["gen_spec"]["seed"] == spec.seed
    assert meta["counts"] == {"train": 20, "val": 5, "test": 5}
    back = read_dataset(csv_path)
    for which in ("train", "val", "test"):
        a, b = data.split(which), back.split(which)
        assert [s.series_id for s in a] == [s.series_id for s in b]
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.context, sb.context)
            assert sa.target == sb.target
            assert sa.clean_target == sb.clean_target


def test_generation_is_byte_stable(tmp_path):
    data = build_split("small", GenSpec(seed=5), 10, 1, (10, 0, 3))
    first = [p.read_bytes() for p in write_dataset(data, tmp_path / "a")]
    again = build_split("small", GenSpec(seed=5), 10, 1, (10, 0, 3))
    second = [p.read_bytes() for p in write_dataset(again, tmp_path / "b")]
    assert first == second
