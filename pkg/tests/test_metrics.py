import numpy as np
import pytest

from qubo_unwrap.errors import InvalidArgumentError
from qubo_unwrap.metrics import format_key_values, match_labels, mismatch_mask, summarize
from qubo_unwrap.phase import LabelGrid


def test_identical():
    k = np.array([[0, 1], [2, 3]])
    r = match_labels(k, k)
    assert r.raw_match_pct == 100.0
    assert r.shift_aligned_match_pct == 100.0
    assert r.best_shift == 0
    assert r.mismatch_count == 0
    assert (r.width, r.height, r.pixel_count) == (2, 2, 4)


def test_global_shift():
    truth = np.array([[1, 2], [3, 3]])
    r = match_labels(LabelGrid(truth - 1, 4), LabelGrid(truth, 4))
    assert r.raw_match_pct == 0.0
    assert r.shift_aligned_match_pct == 100.0
    assert r.best_shift == 1


def test_partial():
    r = match_labels(np.array([[0, 0, 0, 1]]), np.array([[0, 0, 1, 1]]))
    assert r.raw_match_pct == 75.0
    assert r.mismatch_count == 1


def test_shift_tie_prefers_smallest_magnitude():
    # differences -1, -1, 1, 1: tie between -1 and +1, negative first
    r = match_labels(np.array([[1, 1, 0, 0]]), np.array([[0, 0, 1, 1]]))
    assert r.best_shift == -1
    assert r.shift_aligned_match_pct == 50.0


def test_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        match_labels(np.zeros((2, 2), int), np.zeros((2, 3), int))
    assert mismatch_mask(np.array([1, 2]), np.array([1, 3])).tolist() == [False, True]


def test_summarize():
    assert summarize([1.0, 3.0]) == (2.0, 1.0)
    assert summarize(iter([5.0])) == (5.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        summarize([])


def test_key_values():
    assert format_key_values({"a": 1, "b": 2.5}) == "a=1\nb=2.5\n"
    assert set(match_labels([[0]], [[0]]).as_dict()) == {
        "raw_match_pct", "shift_aligned_match_pct", "best_shift", "pixel_count",
        "mismatch_count", "width", "height",
    }
