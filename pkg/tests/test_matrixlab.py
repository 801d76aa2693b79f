import math

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose, assert_array_equal
from scipy.special import comb

from errors import ResourceLimitError, SelfMapError
from matrixlab import (
    TruncatedOperator,
    affine_symbol_matrix,
    diagonal_truncation,
    eigenvalues,
    kron_batch,
    kron_spectrum_check,
    moebius_coefficients,
    moebius_eval,
    moebius_symbol_matrix,
    norm_bound_batch,
    norm_bound_check,
    polynomial_symbol_matrix,
    product_norm_bound_check,
    singular_values,
    sort_spectrum,
    spectrum_points,
    weyl_batch,
    weyl_check,
)
from weights import make_weights


def operator(rows):
    return TruncatedOperator(np.array(rows, dtype=np.complex128))


def test_affine_section_columns():
    T = affine_symbol_matrix(0.5, 0.25, 2)
    expected = [[1, 0.25, 0.0625], [0, 0.5, 0.25], [0, 0, 0.25]]
    assert_allclose(T.entries, np.array(expected), rtol=0, atol=1e-15)
    assert T.is_triangular and not T.is_diagonal


def test_affine_entries_are_binomial():
    s, c, m = 0.3 - 0.2j, 0.1 + 0.4j, 9
    T = affine_symbol_matrix(s, c, m)
    for i in range(m + 1):
        for k in range(m + 1):
            expected = comb(k, i, exact=True) * s ** i * c ** (k - i) if i <= k else 0.0
            assert_allclose(T.entries[i, k], expected, rtol=1e-12, atol=1e-15)
    assert_allclose(np.diag(T.entries), s ** np.arange(m + 1), rtol=1e-12)


def test_sections_are_compressions():
    T = affine_symbol_matrix(0.4j, 0.3, 12)
    assert_array_equal(T.block(5).entries, affine_symbol_matrix(0.4j, 0.3, 4).entries)


def test_polynomial_symbol_truncates_powers():
    T = polynomial_symbol_matrix([0, 0, 1], 4)
    assert T.entries[4, 2] == 1.0
    assert T.entries[0, 0] == 1.0
    assert not np.any(T.entries[:, 3])


def test_eigenvalues_match_the_dense_solver():
    for T in (affine_symbol_matrix(0.6, 0.2j, 8), moebius_symbol_matrix(0.3 + 0.2j, 8)):
        ours = eigenvalues(T)
        reference = scipy.linalg.eigvals(T.entries)
        assert len(ours) == len(reference)
        assert all(np.min(np.abs(reference - value)) < 1e-8 for value in ours)
        assert all(np.abs(ours[1:]) <= np.abs(ours[:-1]))


def test_moebius_coefficients():
    assert_allclose(moebius_coefficients(0, 3), [0, 1, 0, 0])
    assert_allclose(moebius_coefficients(0.5, 3), [-0.5, 0.75, 0.375, 0.1875], rtol=1e-15)


def test_moebius_maps_are_inverse_pairs():
    rng = np.random.default_rng(7)
    for _ in range(20):
        u = rng.uniform(0, 0.9) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        z = rng.uniform(0, 0.95) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        assert abs(moebius_eval(u, moebius_eval(-u, z)) - z) < 1e-12


def test_moebius_at_zero_is_the_identity():
    assert_allclose(moebius_symbol_matrix(0, 6).entries, np.eye(7), rtol=0, atol=0)


def test_symbols_that_leave_the_disk():
    with pytest.raises(SelfMapError):
        affine_symbol_matrix(0.8, 0.5, 5)
    with pytest.raises(SelfMapError):
        moebius_symbol_matrix(1.0, 3)
    with pytest.raises(SelfMapError):
        norm_bound_check(0, 1, 3)


def test_diagonal_singular_values_are_exact():
    w = make_weights('geometric:rho=0.6')
    T = diagonal_truncation(w, 2, 4)
    expected = np.sort(np.abs(np.diag(T.entries)))[::-1]
    assert_array_equal(singular_values(T), expected)
    assert T.dim == 25


def test_swap_matrix():
    T = operator([[0, 1], [1, 0]])
    assert not T.is_triangular
    assert_allclose(singular_values(T), [1, 1])
    assert_allclose(eigenvalues(T), [1, -1], atol=1e-14)


def test_weyl_equality_for_diagonal():
    T = operator([[0.5, 0], [0, 0.25]])
    result = weyl_check(T, 2)
    assert result.ok
    assert_allclose(result.prod_eigs, result.prod_sv, rtol=1e-15)
    assert result.hw_ok is None
    assert weyl_check(T, 1).hw_ok


def test_weyl_for_an_affine_section():
    T = affine_symbol_matrix(0.5, 0.25, 12)
    for n in range(1, 14):
        result = weyl_check(T, n)
        assert result.ok
        assert result.hw_ok in (True, None)
    assert weyl_check(affine_symbol_matrix(0.5, 0.3, 20), 5).hw_ok
    with pytest.raises(ValueError):
        weyl_check(T, 14)


def test_weyl_batch():
    frame = weyl_batch(200, seed=0, show_progress=False)
    assert frame['ok'].all()
    assert not (frame['hw_ok'] == False).any()  # noqa: E712
    assert frame.equals(weyl_batch(200, seed=0, show_progress=False))


def test_kron_of_diagonals():
    T1, T2 = operator([[1, 0], [0, 2]]), operator([[3, 0], [0, 4]])
    result = kron_spectrum_check(T1, T2)
    assert result.ok and result.commute_ok
    spectrum = np.sort(scipy.linalg.eigvals(np.kron(T1.entries, T2.entries)).real)[::-1]
    assert_allclose(spectrum, [8, 6, 4, 3])


def test_kron_with_identity():
    T = affine_symbol_matrix(0.5, 0.2j, 5)
    assert kron_spectrum_check(TruncatedOperator(np.eye(3, dtype=np.complex128)), T).ok


def test_kron_batch():
    frame = kron_batch(100, seed=0, show_progress=False)
    assert frame['ok'].all()
    assert (frame['max_distance'] <= 1e-8).all()


def test_kron_dimension_cap():
    big = TruncatedOperator(np.eye(70, dtype=np.complex128))
    with pytest.raises(ResourceLimitError):
        kron_spectrum_check(big, big)


def test_norm_bound_for_fixed_symbols():
    norm, bound, ok = norm_bound_check(1, 0, 10)
    assert ok and bound == 1.0
    assert_allclose(norm, 1.0)
    norm, bound, ok = norm_bound_check(0.5, 0.25, 40)
    assert ok
    assert_allclose(bound, 1.29099, rtol=1e-5)


def test_section_norms_grow_with_the_degree():
    norms = [norm_bound_check(0.5, 0.4j, m)[0] for m in (5, 10, 20, 40)]
    assert all(later >= earlier * (1 - 1e-12) for earlier, later in zip(norms, norms[1:]))


def test_norm_bound_batch():
    frame = norm_bound_batch(50, seed=1, m=40, show_progress=False)
    assert frame['ok'].all()
    assert frame['monotone'].all()


def test_product_norm_bound():
    norm, bound, ok = product_norm_bound_check([(0.5, 0.25), (0.3, -0.2)], 10)
    assert ok
    assert_allclose(bound, math.sqrt(1.25 / 0.75) * math.sqrt(1.2 / 0.8))
    with pytest.raises(ValueError):
        product_norm_bound_check([], 10)


def test_lattice_spectrum_points():
    spectrum = spectrum_points(make_weights('linear:beta=1'), 4)
    assert_allclose(spectrum.points, np.exp(-np.array([0, 1, 2, 2])), rtol=1e-15)
    assert spectrum.zero_marker
    frame = spectrum.to_frame()
    assert len(frame) == 5
    assert frame['value'].iloc[-1] == '0 (accumulation point)'
    assert len(spectrum_points(make_weights('linear:beta=1'), 1)) == 1
    with pytest.raises(ValueError):
        spectrum_points(make_weights('linear:beta=1'), 0)


def test_diagonal_section_lies_in_the_lattice_spectrum():
    w = make_weights('linear:beta=1')
    section = eigenvalues(diagonal_truncation(w, 2, 6))
    lattice = spectrum_points(w, 1597).points
    for value in section:
        assert np.min(np.abs(lattice - value)) < 1e-12


def test_spectrum_ordering():
    assert_array_equal(sort_spectrum([1j, -1, 0.5]), np.array([1j, -1, 0.5]))


def test_spectrum_ordering_ignores_the_sign_of_zero():
    ordered = sort_spectrum([complex(-1.0, -0.0), complex(1.0, -0.0)])
    assert_array_equal(ordered.real, [1.0, -1.0])
    ordered = sort_spectrum([-1j, 1j, -1])
    assert_array_equal(ordered, np.array([1j, -1, -1j]))


def test_matrix_csv_header(tmp_path):
    path = tmp_path / 'T.csv'
    affine_symbol_matrix(0.5, 0.25, 2).to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith('# affine s=0.5+0i')
    assert lines[1] == '0,1,2'
    assert lines[2].split(',')[0] == '1+0i'
