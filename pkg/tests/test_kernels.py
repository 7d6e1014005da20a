"""The compiled and numpy reduction kernels must be interchangeable."""

import subprocess
import sys

import numpy as np
import pytest

from shillbench import _speed
from shillbench._speed import fallback

try:
    from shillbench._speed import kernels
except ImportError:
    kernels = None


def ragged(rng, rows, max_len, float_mode):
    lengths = rng.integers(1, max_len + 1, size=rows)
    offsets = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    if float_mode:
        flat = rng.random(int(lengths.sum()))
    else:
        flat = rng.integers(1, 7, size=int(lengths.sum())).astype(np.int64)
    return flat, offsets


def test_backend_is_reported():
    assert _speed.BACKEND in ("cython", "python")


@pytest.mark.skipif(kernels is None, reason="compiled extension not built")
@pytest.mark.parametrize("float_mode", [False, True])
def test_backends_agree_on_random_ragged_data(float_mode):
    rng = np.random.default_rng(99)
    for _ in range(50):
        flat, offsets = ragged(rng, rows=int(rng.integers(1, 200)), max_len=9, float_mode=float_mode)
        if float_mode:
            a = fallback.row_top_two_f64(flat, offsets)
            b = kernels.row_top_two_f64(flat, offsets)
        else:
            a = fallback.row_top_two_i64(flat, offsets)
            b = kernels.row_top_two_i64(flat, offsets)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)


def test_integer_reduction_values():
    flat = np.array([3, 1, 3, 2, 5, 1, 4, 4, 4], dtype=np.int64)
    offsets = np.array([0, 3, 4, 6, 9], dtype=np.int64)
    top, second, tied = fallback.row_top_two_i64(flat, offsets)
    assert top.tolist() == [3, 2, 5, 4]
    assert second.tolist() == [3, 0, 1, 4]  # 0 marks "no rival"
    assert tied.tolist() == [2, 1, 1, 3]


def test_float_reduction_values():
    flat = np.array([0.25, 0.75, 0.75, 0.1])
    offsets = np.array([0, 3, 4], dtype=np.int64)
    top, second, tied = fallback.row_top_two_f64(flat, offsets)
    assert top.tolist() == [0.75, 0.1]
    assert second[0] == 0.75 and second[1] == -np.inf
    assert tied.tolist() == [2, 1]


def test_zero_rows():
    empty = np.zeros(0, dtype=np.int64)
    offsets = np.zeros(1, dtype=np.int64)
    top, second, tied = fallback.row_top_two_i64(empty, offsets)
    assert len(top) == len(second) == len(tied) == 0
    if kernels is not None:
        top, second, tied = kernels.row_top_two_i64(empty, offsets)
        assert len(top) == 0


def test_environment_override_forces_python_lane():
    code = (
        "from shillbench import _speed; print(_speed.BACKEND)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "SHILLBENCH_PURE_PYTHON": "1"},
    )
    assert out.stdout.strip() == "python"
