"""The compiled and pure-Python kernels must agree."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdlambda import _kernels_py, kernels

compiled = pytest.importorskip("rdlambda._kernels")

MIN_BPP = 100 / (832 * 480)


def gop_arrays(seed, n):
    rng = np.random.default_rng(seed)
    return (rng.uniform(0.5, 50, n), rng.uniform(-2.5, -0.5, n),
            rng.uniform(0, 0.02, n), rng.choice([1.0, 2.5, 4.5, 10.0], n))


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 16), st.floats(-3, 5))
def test_rate_sum_parity(seed, n, log_lam):
    a, b, g, w = gop_arrays(seed, n)
    lam = 10 ** log_lam
    want = _kernels_py.rate_sum(lam, a, b, g, w, MIN_BPP)
    assert compiled.rate_sum(lam, a, b, g, w, MIN_BPP) == pytest.approx(want, rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 16), st.floats(-4, 2))
def test_central_lambda_parity(seed, n, log_target):
    a, b, g, w = gop_arrays(seed, n)
    target = 10 ** log_target
    lam_p, tot_p, st_p = _kernels_py.central_lambda(a, b, g, w, target, MIN_BPP)
    lam_c, tot_c, st_c = compiled.central_lambda(a, b, g, w, target, MIN_BPP)
    assert st_c == st_p
    assert lam_c == pytest.approx(lam_p, rel=1e-9)
    assert tot_c == pytest.approx(tot_p, rel=1e-9)


@pytest.mark.parametrize("status_target, status", [
    (1e-9, _kernels_py.BELOW_MIN), (1e6, _kernels_py.ABOVE_MAX), (0.5, _kernels_py.CONVERGED),
])
def test_central_lambda_status(status_target, status):
    a, b, g, w = gop_arrays(1, 8)
    for impl in (_kernels_py, compiled):
        assert impl.central_lambda(a, b, g, w, status_target, MIN_BPP)[2] == status


@given(st.integers(0, 2 ** 32 - 1))
def test_sse_parity(seed):
    rng = np.random.default_rng(seed)
    bpp = np.geomspace(0.01, 3, 48)
    mse = rng.uniform(0.5, 50) * (bpp + 0.01) ** -1.0 - 0.1
    x2 = np.log([rng.uniform(0.5, 50), rng.uniform(0.5, 1.5)])
    x4 = np.concatenate([x2, np.log([rng.uniform(1e-3, 0.05), rng.uniform(1e-3, 0.5)])])
    assert compiled.sse_classic(x2, bpp, mse) == pytest.approx(_kernels_py.sse_classic(x2, bpp, mse), rel=1e-12)
    assert compiled.sse_proposed(x4, bpp, mse) == pytest.approx(_kernels_py.sse_proposed(x4, bpp, mse), rel=1e-12)


def test_sse_matches_numpy():
    bpp = np.geomspace(0.01, 3, 48)
    mse = 5.0 * (bpp + 0.02) ** -1.1 - 0.2
    x = np.log([4.0, 1.0, 0.01, 0.1])
    want = float(np.sum((4.0 * (bpp + 0.01) ** -1.0 - 0.1 - mse) ** 2))
    for impl in (_kernels_py, compiled):
        assert impl.sse_proposed(x, bpp, mse) == pytest.approx(want, rel=1e-12)
