import numpy as np
import pytest

from lpm import autodiff as ad


def numeric_grad(f, arrays, h=1e-6):
    """Central differences of a scalar function of several real arrays."""
    grads = []
    for i, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            vals = []
            for sign in (1.0, -1.0):
                bumped = [b.copy() for b in arrays]
                bumped[i][idx] += sign * h
                vals.append(float(f(*bumped)))
            g[idx] = (vals[0] - vals[1]) / (2 * h)
        grads.append(g)
    return grads


def analytic_grad(f, arrays):
    tape = ad.Tape()
    leaves = [tape.leaf(a) for a in arrays]
    loss = f(*leaves)
    return float(loss.value), tape.gradient(loss, leaves)


def assert_grad_matches(f, *arrays, rtol=1e-6, atol=1e-8, h=1e-6):
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    _, analytic = analytic_grad(f, arrays)
    numeric = numeric_grad(f, arrays, h)
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=rtol, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
