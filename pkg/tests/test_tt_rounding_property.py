"""Randomized rounding contract: ||round(T, eps) - T|| <= eps ||T||."""
from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aptt_kit.tt_core import TtTensor, tt_from_dense, tt_round


@st.composite
def tt_instances(draw: st.DrawFn) -> TtTensor:
    d = draw(st.integers(min_value=2, max_value=6))
    modes = draw(st.lists(st.integers(min_value=2, max_value=8), min_size=d, max_size=d))
    ranks = [1] + draw(st.lists(st.integers(min_value=1, max_value=4), min_size=d - 1, max_size=d - 1)) + [1]
    generator = np.random.default_rng(draw(st.integers(min_value=0, max_value=2**32 - 1)))
    cores = []
    for k, n in enumerate(modes):
        core = generator.standard_normal((ranks[k], n, ranks[k + 1]))
        # decaying scales give every tolerance something to truncate
        cores.append(core * generator.uniform(0.01, 1.0, size=(1, 1, ranks[k + 1])))
    return TtTensor(tuple(cores))


@seed(20240917)
@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(tensor=tt_instances(), eps=st.sampled_from([1e-2, 1e-6, 1e-10]))
def test_round_error_within_relative_tolerance(tensor: TtTensor, eps: float) -> None:
    exact = tensor.full()
    norm = float(np.linalg.norm(exact))
    rounded = tt_round(tensor, eps)
    error = float(np.linalg.norm(rounded.full() - exact))
    assert error <= eps * norm + 1e-13 * max(norm, 1.0)
    assert all(r <= s for r, s in zip(rounded.ranks, tensor.ranks))


@seed(7)
@settings(max_examples=60, deadline=None)
@given(
    array=arrays(np.float64, (4, 3, 4, 3), elements=st.floats(-1.0, 1.0, allow_nan=False, width=64)),
    eps=st.sampled_from([1e-2, 1e-6]),
)
def test_from_dense_error_within_relative_tolerance(array: np.ndarray, eps: float) -> None:
    norm = float(np.linalg.norm(array))
    compressed = tt_from_dense(array, eps)
    error = float(np.linalg.norm(compressed.full() - array))
    assert error <= eps * norm + 1e-13
