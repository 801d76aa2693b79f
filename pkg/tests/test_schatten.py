import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cone import enumerate_box
from errors import LargeProductWarning, NonCompactWarning, SchattenDivergenceError
from schatten import (
    is_in_schatten,
    kernel_norm_squared,
    log_euler_product,
    partial_sum_vs_product,
    schatten_power_sum,
    tail_power_sum,
)
from weights import make_weights


def direct_product(p, J, beta=1.0):
    return math.prod(1.0 / (1.0 - math.exp(-p * beta * j)) for j in range(1, J + 1))


def test_single_factor():
    value, tail = schatten_power_sum(make_weights('list:0.5'), 2)
    assert_allclose(value, 4.0 / 3.0, rtol=1e-12)
    assert tail == 0.0


def test_linear_partial_product():
    value, tail = schatten_power_sum(make_weights('linear:beta=1'), 1, 60)
    assert_allclose(value, direct_product(1, 200), rtol=1e-12)
    assert abs(value - 1.98224) < 1e-3
    assert tail < 1e-20


def test_automatic_truncation_meets_threshold():
    product = log_euler_product(make_weights('linear:beta=1'), 2)
    assert product.tail_bound < 1e-15
    assert_allclose(product.value, direct_product(2, 100), rtol=1e-12)


@pytest.mark.parametrize('spec', ['linear:beta=0.5', 'geometric:rho=0.8', 'tower:alpha=0.1', 'tower:alpha=0.5', 'tower:alpha=2'])
def test_tail_bound_dominates_the_neglected_sum(spec):
    w = make_weights(spec)
    for J in (4, 16):
        exact = math.fsum(math.exp(-w.log_weight(j)) for j in range(J + 1, 400) if math.isfinite(w.log_weight(j)))
        assert tail_power_sum(w, 1.0, J) >= exact * (1 - 1e-12)


def test_slowly_growing_tower_converges():
    w = make_weights('tower:alpha=0.1')
    product = log_euler_product(w, 1.0)
    assert product.tail_bound < 1e-15
    assert product.J <= 2 ** 20
    partial = math.fsum(-math.log(-math.expm1(-w.log_weight(j))) for j in range(1, 2001))
    assert partial < product.log_value < math.inf
    assert product.power_sum > 0


def test_tail_bound_certifies_the_full_product():
    w = make_weights('linear:beta=0.5')
    truncated = log_euler_product(w, 1, J=20)
    full = log_euler_product(w, 1)
    assert truncated.log_value <= full.log_value
    assert full.log_value <= truncated.log_value + truncated.tail_log_bound


def test_repeated_weights_give_a_huge_but_finite_product():
    with pytest.warns(NonCompactWarning):
        w = make_weights('list:' + ','.join(['0.9'] * 400))
    with pytest.warns(LargeProductWarning):
        value, tail = schatten_power_sum(w, 2)
    assert math.isfinite(value)
    assert_allclose(math.log(value), 400 * -math.log(1 - 0.81), rtol=1e-12)
    assert tail == 0.0


def test_divergence_signal():
    with pytest.raises(SchattenDivergenceError):
        log_euler_product(make_weights('linear:beta=0.01'), 1, divergence_cap=10.0)


def test_p_monotonicity():
    w = make_weights('geometric:rho=0.7')
    values = [schatten_power_sum(w, p)[0] for p in (0.5, 1, 2, 4)]
    assert all(later <= earlier for earlier, later in zip(values, values[1:]))


@pytest.mark.parametrize('spec, p', [
    ('linear:beta=1', 0.01),
    ('list:0.9,0.2', 1),
    ('geometric:rho=0.99', 0.001),
    ('tower:alpha=0.5', 0.1),
])
def test_membership(spec, p):
    assert is_in_schatten(make_weights(spec), p)


def test_membership_needs_positive_p():
    with pytest.raises(ValueError):
        is_in_schatten(make_weights('linear:beta=1'), 0)


def test_geometric_chain_partial_sum():
    report = partial_sum_vs_product(make_weights('list:0.5'), 1, 20, show_progress=False)
    assert_allclose(report.partial_sum, 2 * (1 - 2 ** -20), rtol=1e-14)
    assert_allclose(report.product_value, 2.0, rtol=1e-14)
    assert report.consistent
    assert report.membership == 'yes'
    assert report.N_used == 20 and report.J_used == 1


def test_linear_partial_sums_approach_the_product():
    w = make_weights('linear:beta=1')
    report = partial_sum_vs_product(w, 1, 5000, show_progress=False)
    assert abs(report.partial_sum - 1.98224) < 1e-3
    assert report.consistent

    report = partial_sum_vs_product(w, 2, 1000, show_progress=False)
    assert abs(report.partial_sum - direct_product(2, 100)) < 1e-6


def test_partial_sums_are_monotone_and_bounded():
    w = make_weights('geometric:rho=0.6')
    sums = [partial_sum_vs_product(w, 1.5, N, show_progress=False) for N in (10, 100, 1000)]
    assert all(b.partial_sum >= a.partial_sum for a, b in zip(sums, sums[1:]))
    assert all(report.gap >= 0 for report in sums)


def test_explicit_list_product_is_the_limit():
    w = make_weights('list:0.5,0.3')
    report = partial_sum_vs_product(w, 1, 20000, show_progress=False)
    assert_allclose(report.partial_sum, report.product_value, rtol=1e-6)


def test_kernel_norm_matches_the_box_sum():
    z = np.array([0.5, 0.3j, -0.2])
    w = make_weights('list:' + ','.join(str(v) for v in np.abs(z) ** 2))
    box = enumerate_box(w, 3, 40)
    total = math.fsum(math.exp(-point.log_value) for point in box)
    assert_allclose(kernel_norm_squared(z), total, rtol=1e-12)
    assert_allclose(kernel_norm_squared(z), 1 / (0.75 * 0.91 * 0.96), rtol=1e-14)


def test_kernel_norm_outside_the_polydisk():
    with pytest.raises(ValueError):
        kernel_norm_squared([0.5, 1.0])
