import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tagrank.core import (Dataset, Example, ValidationError, check_scores,
                          label_vector_from)


def test_label_vector_basic():
    y = label_vector_from([0, 2], 3)
    np.testing.assert_array_equal(y.indicator, [1, 0, 1])
    assert (y.c_plus, y.c_minus) == (2, 1)


def test_label_vector_saturated():
    y = label_vector_from(range(4), 4)
    assert y.indicator.all() and y.c_minus == 0


def test_label_vector_errors():
    with pytest.raises(ValidationError):
        label_vector_from([], 3)
    with pytest.raises(ValidationError, match="5"):
        label_vector_from([0, 5], 3)


@given(st.integers(1, 40).flatmap(
    lambda c: st.tuples(st.just(c), st.sets(st.integers(0, c - 1), min_size=1))))
def test_label_vector_round_trip(case):
    c, labels = case
    ex = Example(np.zeros(2), frozenset(labels))
    assert set(label_vector_from(ex, c).positives.tolist()) == labels


def test_example_validation():
    with pytest.raises(ValidationError):
        Example([1.0], frozenset())
    with pytest.raises(ValidationError):
        Example([np.nan], frozenset({0}))
    with pytest.raises(ValidationError):
        Example([1.0], [0, 0])


def test_dataset_validation():
    ex = Example([1.0, 2.0], frozenset({3}))
    with pytest.raises(ValidationError, match="out of range"):
        Dataset((ex,), num_tags=3, dim=2)
    with pytest.raises(ValidationError, match="dim"):
        Dataset((ex,), num_tags=4, dim=3)
    with pytest.raises(ValidationError):
        Dataset((ex,), num_tags=4, dim=2, tag_names=("a",))


def test_immutable():
    ex = Example([1.0, 2.0], frozenset({0}))
    with pytest.raises(ValueError):
        ex.features[0] = 5.0
    ds = Dataset((ex,), 2, 2)
    with pytest.raises(ValueError):
        ds.Y[0, 0] = False
    with pytest.raises(AttributeError):
        ds.num_tags = 5


def test_from_arrays_indicator_and_sets():
    X = np.arange(6.0).reshape(3, 2)
    a = Dataset.from_arrays(X, np.array([[1, 0], [0, 1], [1, 1]]))
    b = Dataset.from_arrays(X, [[0], [1], [0, 1]], num_tags=2)
    assert a == b
    assert a.tag_names == ("tag000", "tag001")


def test_check_scores():
    with pytest.raises(ValidationError):
        check_scores([1.0, np.inf])
    with pytest.raises(ValidationError):
        check_scores([1.0, 2.0], 3)
