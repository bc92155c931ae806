"""Parity between the compiled kernels and the numpy fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fheact.kernels import _pykern

try:
    from fheact.kernels import _fastkern
except ImportError:
    _fastkern = None

needs_ext = pytest.mark.skipif(_fastkern is None, reason="compiled extension not built")

finite = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6
)


@needs_ext
class TestParity:
    @given(
        st.lists(finite, min_size=1, max_size=64),
        st.integers(min_value=-100, max_value=100),
    )
    @settings(max_examples=200, deadline=None)
    def test_rot_mac(self, values, k):
        src = np.array(values)
        mask = np.linspace(-1, 1, len(src))
        a1 = np.zeros(len(src))
        a2 = np.zeros(len(src))
        _pykern.rot_mac(a1, src, k, mask)
        _fastkern.rot_mac(a2, src, k, mask)
        np.testing.assert_allclose(a1, a2, rtol=1e-15)

    @given(
        st.lists(finite, min_size=1, max_size=64),
        st.integers(min_value=-100, max_value=100),
    )
    @settings(max_examples=200, deadline=None)
    def test_sparse_rot_mac(self, values, k):
        src = np.array(values)
        n = len(src)
        idx = np.arange(0, n, 2, dtype=np.int64)
        val = np.linspace(-2, 2, len(idx))
        a1 = np.zeros(n)
        a2 = np.zeros(n)
        _pykern.sparse_rot_mac(a1, src, k, idx, val)
        _fastkern.sparse_rot_mac(a2, src, k, idx, val)
        np.testing.assert_allclose(a1, a2, rtol=1e-15)

    @given(
        st.lists(finite, min_size=1, max_size=64),
        st.floats(min_value=1.0, max_value=1e6),
        st.integers(min_value=1, max_value=2**40),
    )
    @settings(max_examples=200, deadline=None)
    def test_quantize_saturate(self, values, scale, qmax):
        x = np.array(values)
        np.testing.assert_array_equal(
            _pykern.quantize_saturate(x, scale, qmax),
            _fastkern.quantize_saturate(x, scale, qmax),
        )

    @given(st.lists(st.integers(min_value=-(2**40), max_value=2**40), min_size=1, max_size=64))
    @settings(max_examples=100, deadline=None)
    def test_dequantize(self, qs):
        q = np.array(qs, dtype=np.int64)
        np.testing.assert_allclose(
            _pykern.dequantize(q, 512.0), _fastkern.dequantize(q, 512.0), rtol=1e-15
        )

    @given(
        st.lists(st.integers(min_value=-100, max_value=100), min_size=1, max_size=64),
        st.integers(min_value=-100, max_value=100),
    )
    @settings(max_examples=100, deadline=None)
    def test_compare_less(self, avals, shift):
        a = np.array(avals, dtype=np.int64)
        b = a[::-1].copy() + shift
        np.testing.assert_array_equal(
            _pykern.compare_less(a, b), _fastkern.compare_less(a, b)
        )


class TestSemantics:
    def test_sparse_equals_dense_rot_mac(self, rng):
        src = rng.normal(size=32)
        mask = np.zeros(32)
        idx = np.array([1, 4, 9, 30], dtype=np.int64)
        val = rng.normal(size=4)
        mask[idx] = val
        dense = np.zeros(32)
        sparse = np.zeros(32)
        _pykern.rot_mac(dense, src, 7, mask)
        _pykern.sparse_rot_mac(sparse, src, 7, idx, val)
        np.testing.assert_allclose(dense, sparse, rtol=1e-15)

    def test_round_half_away_from_zero(self):
        q = _pykern.quantize_saturate(np.array([0.5, -0.5, 2.5, -2.5]), 1.0, 100)
        np.testing.assert_array_equal(q, [1, -1, 3, -3])

    def test_backend_env_override(self):
        import subprocess
        import sys

        out = subprocess.run(
            [sys.executable, "-c", "from fheact import kernels; print(kernels.BACKEND)"],
            env={"FHEACT_PURE": "1", "PATH": "/usr/bin:/bin"},
            capture_output=True,
            text=True,
        )
        assert out.stdout.strip() == "python"
