"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the pytest
terminal summary) before asserting, so a full run shows every outcome.
"""

import hashlib
import json
import time

import numpy as np
import pytest

from lpm import autodiff as ad
from lpm.attention import AttnConfig, count_params as attn_count
from lpm.cli import main
from lpm.complexity import LENGTHS, measure
from lpm.experiments import get_preset, run_experiment
from lpm.gradcheck import build_model, run_gradcheck
from lpm.phasor import LpmConfig, count_params, dft_mix, pullback
from lpm.spectral import naive_dft

from conftest import ACCEPTANCE_LINES


def report(number: int, title: str, ok: bool, detail: str, elapsed: float) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail} | {elapsed:.1f}s"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def benchmark_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    start = time.perf_counter()
    code = main(["benchmark", "--preset", "n32", "--no-timing", "--out", str(root)])
    elapsed = time.perf_counter() - start
    assert code == 0
    return root / "benchmark-n32-seed0", elapsed


def test_criterion_1_parameter_counts():
    start = time.perf_counter()
    counts = {
        "D2T10": count_params(LpmConfig(context_len=10, depth=2, readout_shift=True)),
        "D1T32": count_params(LpmConfig(context_len=32, depth=1, readout_shift=False)),
        "D3T16": count_params(LpmConfig(context_len=16, depth=3, readout_shift=True)),
        "attn": attn_count(AttnConfig(context_len=32)),
    }
    rho = counts["attn"] / counts["D1T32"]
    ok = counts == {"D2T10": 50, "D1T32": 64, "D3T16": 112, "attn": 3329} and abs(rho - 52.02) <= 0.01
    report(1, "parameter counts", ok, f"{counts} rho={rho:.4f}", time.perf_counter() - start)


def test_criterion_2_unitarity_and_fast_mixing():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_norm = worst_oracle = 0.0
    for T in (4, 8, 10, 16, 32, 64):
        z = np.exp(1j * rng.uniform(-np.pi, np.pi, (100, T)))
        out = dft_mix(z)
        worst_norm = max(worst_norm, np.max(np.abs(np.linalg.norm(out, axis=1) - np.linalg.norm(z, axis=1))))
        worst_oracle = max(worst_oracle, np.max(np.abs(out - naive_dft(z))))
    elapsed = time.perf_counter() - start
    ok = worst_norm < 1e-10 and worst_oracle < 1e-9 and elapsed < 5
    report(2, "unitarity and FFT oracle", ok, f"norm err {worst_norm:.2e}, oracle err {worst_oracle:.2e}", elapsed)


def test_criterion_3_pullback_contract():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    phi = rng.uniform(-10 * np.pi, 10 * np.pi, 100_000)
    folded = ad.fold_angle(phi)
    in_range = bool(np.all(np.abs(folded) <= np.pi / 2))
    idempotent = bool(np.array_equal(ad.fold_angle(folded), folded))
    periodic_err = float(np.max(np.abs(ad.fold_angle(phi + 2 * np.pi) - folded)))
    exact_err = float(np.max(np.abs(folded - np.arcsin(np.sin(phi)))))
    # the same contract through the state-level operator
    z = rng.uniform(0.1, 3.0, phi.size) * np.exp(1j * phi)
    lifted = pullback(z)
    state_err = float(np.max(np.abs(np.angle(lifted) - folded)))
    unit = float(np.max(np.abs(np.abs(lifted) - 1.0)))
    elapsed = time.perf_counter() - start
    ok = (in_range and idempotent and periodic_err < 1e-12 and exact_err < 1e-9
          and state_err < 1e-12 and unit < 1e-15 and elapsed < 1)
    detail = (f"range={in_range} idempotent={idempotent} periodic err {periodic_err:.1e} "
              f"vs arcsin(sin) {exact_err:.1e} state err {state_err:.1e}")
    report(3, "pull-back contract", ok, detail, elapsed)


def test_criterion_4_gradient_fidelity():
    start = time.perf_counter()
    errs = {}
    for label, model in (("phasor D=1", build_model("phasor", 8, 1)),
                         ("phasor D=3", build_model("phasor", 8, 3)),
                         ("attention N=8", build_model("attention", 8))):
        errs[label] = run_gradcheck(model, points=10, seed=4)["max_rel_err"]
    elapsed = time.perf_counter() - start
    ok = max(errs.values()) < 1e-4 and elapsed < 30
    report(4, "gradient fidelity", ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()), elapsed)


def test_criterion_5_t10_reproduction():
    start = time.perf_counter()
    _, _, record = run_experiment(get_preset("t10_single"))
    elapsed = time.perf_counter() - start
    ratio = record.train_curve[0] / record.train_curve[-1]
    ok = ratio >= 10 and record.test_mse < 0.15 and elapsed < 120
    detail = (f"train {record.train_curve[0]:.4f} -> {record.train_curve[-1]:.4f} ({ratio:.1f}x), "
              f"test MSE {record.test_mse:.4f}")
    report(5, "T=10 phasor training", ok, detail, elapsed)


def test_criterion_6_deep_stack_rollout():
    start = time.perf_counter()
    _, _, record = run_experiment(get_preset("d3_rollout"))
    elapsed = time.perf_counter() - start
    r = record.extra["rollout"]
    bounded = r["completed_steps"] == 20 and r["max_abs_prediction"] <= 2 * r["train_amplitude"]
    ok = (record.train_curve[-1] < 0.10 and bounded
          and r["rollout_mse"] < r["clean_variance"] and elapsed < 180)
    detail = (f"train MSE {record.train_curve[-1]:.4f}, max|x| {r['max_abs_prediction']:.2f} "
              f"<= {2 * r['train_amplitude']:.2f}, rollout MSE {r['rollout_mse']:.3f} "
              f"< clean var {r['clean_variance']:.3f}")
    report(6, "D=3 deep stack + 20-step rollout", ok, detail, elapsed)


def test_criterion_7_benchmark_ordering(benchmark_dir):
    run_dir, elapsed = benchmark_dir
    rep = json.loads((run_dir / "benchmark.json").read_text())
    rows = {r["model"]: r for r in rep["rows"]}
    phasor, attn, const = rows["phasor"]["test_mae"], rows["attention"]["test_mae"], rep["constant_mean_mae"]
    counts_ok = rows["phasor"]["param_count"] == 64 and rows["attention"]["param_count"] == 3329
    ok = attn < phasor < const and counts_ok and abs(rep["param_ratio"] - 52.02) <= 0.01 and elapsed < 600
    detail = f"MAE attention {attn:.4f} < phasor {phasor:.4f} < constant {const:.4f}, rho {rep['param_ratio']:.2f}"
    report(7, "N=32 benchmark ordering", ok, detail, elapsed)


def test_criterion_8_mixing_complexity():
    start = time.perf_counter()
    phasor = measure("phasor", LENGTHS)
    attention = measure("attention", LENGTHS)
    elapsed = time.perf_counter() - start
    ok = phasor["slope"] <= 1.35 and attention["slope"] >= 1.65 and elapsed < 120
    report(8, "mixing-time scaling", ok,
           f"phasor slope {phasor['slope']:.2f}, attention slope {attention['slope']:.2f}", elapsed)


def test_criterion_9_determinism(tmp_path, benchmark_dir):
    start = time.perf_counter()
    run_dir, _ = benchmark_dir
    digest = lambda p: hashlib.sha256(p.read_bytes()).hexdigest()
    mismatched = []
    for name in ("t10_single", "n32_phasor", "d3_rollout"):
        for sub in ("a", "b"):
            assert main(["train", "--experiment", name, "--no-timing", "--out", str(tmp_path / sub)]) == 0
        if digest(tmp_path / "a" / f"{name}-seed0" / "metrics.json") != digest(tmp_path / "b" / f"{name}-seed0" / "metrics.json"):
            mismatched.append(name)
    # the attention preset is compared against its run inside the benchmark
    assert main(["train", "--experiment", "n32_attention", "--no-timing", "--out", str(tmp_path / "c")]) == 0
    if digest(tmp_path / "c" / "n32_attention-seed0" / "metrics.json") != digest(run_dir / "n32_attention" / "metrics.json"):
        mismatched.append("n32_attention")
    elapsed = time.perf_counter() - start
    report(9, "byte-identical reruns", not mismatched,
           f"4 presets compared, mismatched: {mismatched or 'none'}", elapsed)
