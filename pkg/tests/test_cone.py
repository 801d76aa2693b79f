import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cone import LatticePoint, MultiIndex, enumerate_box, eval_log_eigenvalue
from errors import ResourceLimitError, WeightIndexError
from weights import make_weights


def test_text_form_round_trips():
    alpha = MultiIndex.parse('1^2*3^1')
    assert alpha.entries == ((1, 2), (3, 1))
    assert alpha.to_text() == '1^2*3^1'
    assert str(MultiIndex.zero()) == '1'
    assert MultiIndex.parse('1') == MultiIndex.zero()


def test_structure():
    alpha = MultiIndex.from_mapping({4: 1, 2: 3, 7: 0})
    assert alpha.entries == ((2, 3), (4, 1))
    assert alpha.support == (2, 4)
    assert alpha.degree == 4
    assert alpha.highest == 4
    assert alpha.exponent(2) == 3 and alpha.exponent(3) == 0
    assert MultiIndex.from_exponents([1, 0, 2]) == MultiIndex(((1, 1), (3, 2)))
    assert alpha + MultiIndex(((1, 1), (2, 1))) == MultiIndex(((1, 1), (2, 4), (4, 1)))
    assert not MultiIndex.zero()


@pytest.mark.parametrize('entries', [((2, 1), (1, 1)), ((1, 0),), ((0, 1),), ((1, 1), (1, 2))])
def test_invalid_entries(entries):
    with pytest.raises(ValueError):
        MultiIndex(entries)


def test_bad_text():
    with pytest.raises(ValueError):
        MultiIndex.parse('1*2')


def test_eval_log_eigenvalue():
    w = make_weights('linear:beta=1')
    assert eval_log_eigenvalue(w, MultiIndex.parse('1^2*3^1')) == 5.0
    assert eval_log_eigenvalue(w, MultiIndex.zero()) == 0.0
    point = LatticePoint(MultiIndex.parse('2^1'), 2.0)
    assert_allclose(point.eigenvalue, math.exp(-2.0))


def test_eval_outside_list():
    with pytest.raises(WeightIndexError):
        eval_log_eigenvalue(make_weights('list:0.5'), MultiIndex.parse('2^1'))


def test_box_is_complete_and_duplicate_free():
    points = enumerate_box(make_weights('linear:beta=1'), 3, 2)
    assert len(points) == 27
    assert len({point.index for point in points}) == 27
    assert all(max(a for _, a in point.index.entries) <= 2 for point in points if point.index)


def test_box_values_match_evaluation():
    w = make_weights('geometric:rho=0.6')
    for point in enumerate_box(w, 3, 3):
        assert point.log_value == eval_log_eigenvalue(w, point.index)


def test_pruned_box_is_the_filtered_box():
    w = make_weights('linear:beta=1')
    full = enumerate_box(w, 4, 4)
    pruned = enumerate_box(w, 4, 4, max_log_value=5.0)
    expected = sorted(point.index.order_key() for point in full if point.log_value <= 5.0)
    assert sorted(point.index.order_key() for point in pruned) == expected


def test_box_cap():
    with pytest.raises(ResourceLimitError):
        enumerate_box(make_weights('linear:beta=1'), 10, 9, cap=1000)
    with pytest.raises(ResourceLimitError):
        enumerate_box(make_weights('linear:beta=1'), 10, 9, max_log_value=20.0, cap=10)


def test_box_past_list_length():
    with pytest.raises(WeightIndexError):
        enumerate_box(make_weights('list:0.5'), 2, 3)


def test_deep_box_does_not_recurse():
    w = make_weights('geometric:rho=0.5')
    points = enumerate_box(w, 1500, 0)
    assert points == [LatticePoint(MultiIndex.zero(), 0.0)]
    pruned = enumerate_box(w, 1500, 1, max_log_value=2.5 * math.log(2))
    assert sorted(point.index.to_text() for point in pruned) == ['1', '1^1', '2^1']


@pytest.mark.parametrize('spec', ['geometric:rho=0.6', 'tower:alpha=0.5', 'linear:beta=0.7'])
def test_log_eigenvalue_is_additive(spec):
    w = make_weights(spec)
    rng = np.random.default_rng(3)

    def random_index():
        support = rng.choice(np.arange(1, 31), size=int(rng.integers(0, 6)), replace=False)
        return MultiIndex.from_mapping({int(j): int(rng.integers(1, 5)) for j in support})

    for _ in range(200):
        a, b = random_index(), random_index()
        assert_allclose(
            eval_log_eigenvalue(w, a + b),
            eval_log_eigenvalue(w, a) + eval_log_eigenvalue(w, b),
            rtol=1e-12, atol=1e-12,
        )
