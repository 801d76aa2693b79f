import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
import scipy.linalg

from cone import enumerate_box
from errors import EigenResidualError, ResourceLimitError, SelfMapError
from helper import format_complex, option, progress, typechecked, write_table
from rearrange import EigenvalueStream
from weights import WeightSequence


@dataclass
class TruncatedOperator:
    """
    Finite section of a composition operator on the monomials z^0..z^m.

    Entry (i, k) is the coefficient of z^i in phi(z)^k. For affine symbols the
    entries vanish below the diagonal (i > k).

    Attributes
    ----------
    entries : np.ndarray
        Dense complex matrix.
    provenance : str
        Symbol description.
    """

    entries: np.ndarray
    provenance: str = ''

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def is_triangular(self):
        T = self.entries
        return not np.any(np.tril(T, -1)) or not np.any(np.triu(T, 1))

    @property
    def is_diagonal(self):
        T = self.entries
        return not np.any(T - np.diag(np.diag(T)))

    def block(self, size):
        """Top-left size x size section."""
        return TruncatedOperator(self.entries[:size, :size].copy(), self.provenance)

    def to_frame(self):
        """Row-major frame of `re+imi` strings, one column per input degree."""
        columns = [str(k) for k in range(self.entries.shape[1])]
        return pd.DataFrame([[format_complex(z) for z in row] for row in self.entries], columns=columns)

    def to_csv(self, path=None):
        write_table(self.to_frame(), path, comment=self.provenance or None)


@dataclass
class SpectrumSet:
    """
    Spectrum points with multiplicity, sorted by modulus descending then argument ascending.

    `zero_marker` flags the accumulation point 0, which is never one of `points`.
    `log_values` holds log(1/|z|) for lattice spectra, where points may underflow.
    """

    points: np.ndarray
    source: str
    zero_marker: bool = False
    log_values: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.points)

    def to_frame(self):
        frame = pd.DataFrame({
            'rank': np.arange(1, len(self.points) + 1),
            'value': [format_complex(z) for z in self.points],
            'modulus': np.abs(self.points),
        })
        if self.log_values is not None:
            frame['log_value'] = self.log_values
        if self.zero_marker:
            marker = {'rank': '', 'value': '0 (accumulation point)', 'modulus': 0.0}
            if self.log_values is not None:
                marker['log_value'] = math.inf
            frame = pd.concat([frame, pd.DataFrame([marker])], ignore_index=True)
        return frame


def sort_spectrum(points):
    """Sort by decreasing modulus, then by argument in [0, 2 pi); a real point counts as +0 imaginary."""
    points = np.asarray(points, dtype=np.complex128)
    angle = np.where(
        points.imag == 0,
        np.where(points.real < 0, np.pi, 0.0),
        np.mod(np.angle(points), 2 * np.pi),
    )
    order = np.lexsort((angle, -np.abs(points)))
    return points[order]


def _check_affine(s, c, strict=False):
    total = abs(s) + abs(c)
    if total > 1.0 or (strict and abs(c) >= 1.0):
        raise SelfMapError('not a self-map certificate: |s| + |c| = {!r} for s={!r}, c={!r}'.format(total, s, c))


# ---------------------------------------------------------------- builders


@typechecked
def polynomial_symbol_matrix(coeffs, m: int, provenance: str = '') -> TruncatedOperator:
    """
    Finite section of C_phi for a polynomial (or truncated power series) symbol.

    Parameters
    ----------
    coeffs : array_like
        Taylor coefficients of phi, constant term first.
    m : int
        Largest monomial degree.

    Returns
    -------
    TruncatedOperator
        (m+1) x (m+1) matrix whose k-th column holds phi^k truncated at degree m.
    """
    if m < 0:
        raise ValueError('m must be >= 0, got {}'.format(m))
    coeffs = np.asarray(coeffs, dtype=np.complex128)[:m + 1]
    T = np.zeros((m + 1, m + 1), dtype=np.complex128)
    power = np.ones(1, dtype=np.complex128)
    T[0, 0] = 1.0
    for k in range(1, m + 1):
        power = np.convolve(power, coeffs)[:m + 1]
        T[:len(power), k] = power
    return TruncatedOperator(T, provenance)


@typechecked
def affine_symbol_matrix(s: complex, c: complex, m: int) -> TruncatedOperator:
    """
    Finite section of C_phi for phi(z) = s z + c.

    Entry (i, k) is C(k, i) s^i c^(k-i) for i <= k and 0 otherwise.
    """
    _check_affine(s, c)
    return polynomial_symbol_matrix([c, s], m, 'affine s={} c={} m={}'.format(format_complex(s), format_complex(c), m))


@typechecked
def moebius_coefficients(u: complex, m: int) -> np.ndarray:
    """Taylor coefficients of (z - u) / (1 - conj(u) z) up to degree m."""
    if abs(u) >= 1.0:
        raise SelfMapError('Moebius parameter must satisfy |u| < 1, got |u| = {!r}'.format(abs(u)))
    if m < 0:
        raise ValueError('m must be >= 0, got {}'.format(m))
    coeffs = np.empty(m + 1, dtype=np.complex128)
    coeffs[0] = -u
    if m >= 1:
        coeffs[1:] = (1.0 - abs(u) ** 2) * np.conj(u) ** np.arange(m)
    return coeffs


def moebius_eval(u, z):
    """Phi_u(z) = (z - u) / (1 - conj(u) z), elementwise."""
    z = np.asarray(z, dtype=np.complex128)
    return (z - u) / (1.0 - np.conj(u) * z)


@typechecked
def moebius_symbol_matrix(u: complex, m: int) -> TruncatedOperator:
    """Finite section of C_(Phi_u); exact up to degree m."""
    return polynomial_symbol_matrix(moebius_coefficients(u, m), m, 'moebius u={} m={}'.format(format_complex(u), m))


@typechecked
def diagonal_truncation(w: WeightSequence, d: int, maxdeg: int) -> TruncatedOperator:
    """
    Diagonal operator with entries lambda^alpha over the box alpha in {0..maxdeg}^d.

    Rows follow the box enumeration order.
    """
    points = enumerate_box(w, d, maxdeg)
    values = np.exp(-np.array([point.log_value for point in points], dtype=np.float64))
    return TruncatedOperator(np.diag(values.astype(np.complex128)), 'diagonal {} d={} maxdeg={}'.format(w.spec, d, maxdeg))


# ---------------------------------------------------------------- spectra


@typechecked
def singular_values(T: TruncatedOperator) -> np.ndarray:
    """
    Singular values, non-increasing.

    Diagonal matrices take the sorted absolute diagonal as is; everything else
    goes through a dense SVD.
    """
    if T.is_diagonal:
        return np.sort(np.abs(np.diag(T.entries)))[::-1]
    return scipy.linalg.svdvals(T.entries)


@typechecked
def eigenvalues(T: TruncatedOperator, tolerance: Optional[float] = None) -> np.ndarray:
    """
    Eigenvalues sorted by modulus descending, then argument ascending.

    Triangular matrices are read off the diagonal. Otherwise the general solver
    is used and every eigenpair must pass ||Tv - lambda v|| <= tolerance ||T||.

    Parameters
    ----------
    T : TruncatedOperator
        Matrix.
    tolerance : float, optional
        Relative residual bound (default matrixlab.residual_tolerance).

    Returns
    -------
    np.ndarray
    """
    if T.is_triangular:
        return sort_spectrum(np.diag(T.entries))
    tolerance = option(tolerance, 'matrixlab', 'residual_tolerance')
    values, vectors = scipy.linalg.eig(T.entries)
    residual = float(np.max(np.linalg.norm(T.entries @ vectors - vectors * values, axis=0)))
    limit = tolerance * float(scipy.linalg.svdvals(T.entries)[0])
    if residual > limit:
        raise EigenResidualError(residual, limit)
    return sort_spectrum(values)


class WeylResult(NamedTuple):
    prod_eigs: float
    prod_sv: float
    hw_ok: Optional[bool]
    ok: bool


def _sum_log(values):
    with np.errstate(divide='ignore'):
        return float(np.sum(np.log(values)))


@typechecked
def weyl_check(T: TruncatedOperator, n: int, tolerance: Optional[float] = None) -> WeylResult:
    """
    prod_{j<=n} |lambda_j| <= prod_{j<=n} a_j, and |lambda_2n|^2 <= a_1 a_n when 2n <= dim.

    Both products are compared in log-space with a multiplicative tolerance
    1 + tolerance (default matrixlab.weyl_tolerance). Computed singular values
    are only known to dim * eps * a_1 absolutely, so the right-hand sides use
    that upper error bar; it matters only for values near the noise floor.
    hw_ok is None when 2n > dim.
    """
    if not 1 <= n <= T.dim:
        raise ValueError('n must be in 1..{}, got {}'.format(T.dim, n))
    tolerance = option(tolerance, 'matrixlab', 'weyl_tolerance')
    slack = math.log1p(tolerance)
    moduli = np.abs(eigenvalues(T))
    sv = singular_values(T)
    sv_upper = sv if T.is_diagonal else sv + T.dim * np.finfo(np.float64).eps * sv[0]

    log_eigs = _sum_log(moduli[:n])
    ok = log_eigs <= _sum_log(sv_upper[:n]) + slack

    hw_ok = None
    if 2 * n <= T.dim:
        hw_ok = bool(2.0 * _sum_log(moduli[2 * n - 1:2 * n]) <= _sum_log(sv_upper[[0, n - 1]]) + slack)
    return WeylResult(math.exp(log_eigs), math.exp(_sum_log(sv[:n])), hw_ok, bool(ok))


class KronResult(NamedTuple):
    ok: bool
    commute_ok: bool
    max_distance: float


@typechecked
def kron_spectrum_check(
    T1: TruncatedOperator,
    T2: TruncatedOperator,
    tol: float = 1e-8,
    cap: Optional[int] = None,
) -> KronResult:
    """
    sigma(T1 (x) T2) is contained in {mu nu : mu in sigma(T1), nu in sigma(T2)}.

    Also checks that T1 (x) I and I (x) T2 commute, up to matrixlab.commute_tolerance
    relative to ||T1|| ||T2||.

    Returns
    -------
    KronResult
        `max_distance` is the largest distance from an eigenvalue of the product
        to the nearest product of factor eigenvalues.
    """
    cap = option(cap, 'matrixlab', 'kron_dim_cap', int)
    d1, d2 = T1.dim, T2.dim
    if d1 * d2 > cap:
        raise ResourceLimitError('Kronecker product dimension', d1 * d2, cap)

    K = np.kron(T1.entries, T2.entries)
    spectrum = scipy.linalg.eigvals(K)
    products = np.multiply.outer(eigenvalues(T1), eigenvalues(T2)).ravel()
    distances = np.min(np.abs(spectrum[:, None] - products[None, :]), axis=1)
    max_distance = float(np.max(distances))

    x1 = np.kron(T1.entries, np.eye(d2))
    x2 = np.kron(np.eye(d1), T2.entries)
    scale = max(1.0, float(np.linalg.norm(T1.entries, 2) * np.linalg.norm(T2.entries, 2)))
    commute_ok = bool(np.max(np.abs(x1 @ x2 - x2 @ x1)) <= option(None, 'matrixlab', 'commute_tolerance') * scale)
    return KronResult(bool(max_distance <= tol) and commute_ok, commute_ok, max_distance)


def _norm_bound(c):
    return math.sqrt((1.0 + abs(c)) / (1.0 - abs(c)))


@typechecked
def norm_bound_check(s: complex, c: complex, m: int, tolerance: Optional[float] = None) -> tuple:
    """
    ||P_m C_phi P_m|| <= sqrt((1 + |c|) / (1 - |c|)) for phi(z) = s z + c.

    Returns
    -------
    tuple
        (norm, bound, ok)
    """
    _check_affine(s, c, strict=True)
    tolerance = option(tolerance, 'matrixlab', 'weyl_tolerance')
    norm = float(singular_values(affine_symbol_matrix(s, c, m))[0])
    bound = _norm_bound(c)
    return norm, bound, bool(norm <= bound * (1.0 + tolerance))


@typechecked
def product_norm_bound_check(symbols: list, m: int, tolerance: Optional[float] = None, cap: Optional[int] = None) -> tuple:
    """
    Norm of the tensor product of affine sections against prod_j sqrt((1 + |c_j|) / (1 - |c_j|)).

    Parameters
    ----------
    symbols : list of (s, c)
        One affine symbol per variable.
    m : int
        Degree cap per variable.

    Returns
    -------
    tuple
        (norm, bound, ok)
    """
    if not symbols:
        raise ValueError('symbols is empty')
    cap = option(cap, 'matrixlab', 'kron_dim_cap', int)
    tolerance = option(tolerance, 'matrixlab', 'weyl_tolerance')
    dim = (m + 1) ** len(symbols)
    if dim > cap:
        raise ResourceLimitError('product section dimension', dim, cap)

    K = np.ones((1, 1), dtype=np.complex128)
    bound = 1.0
    for s, c in symbols:
        _check_affine(s, c, strict=True)
        K = np.kron(K, affine_symbol_matrix(complex(s), complex(c), m).entries)
        bound *= _norm_bound(c)
    norm = float(scipy.linalg.svdvals(K)[0])
    return norm, bound, bool(norm <= bound * (1.0 + tolerance))


@typechecked
def spectrum_points(w: WeightSequence, N: int) -> SpectrumSet:
    """
    The N largest lattice eigenvalues lambda^alpha, 1 included, plus the 0 marker.
    """
    if N < 1:
        raise ValueError('N must be >= 1, got {}'.format(N))
    points = EigenvalueStream(w).take(N)
    logs = np.array([point.log_value for point in points], dtype=np.float64)
    return SpectrumSet(np.exp(-logs).astype(np.complex128), 'lattice', zero_marker=True, log_values=logs)


# ---------------------------------------------------------------- random batches


def random_affine(rng):
    """Admissible (s, c) with |s| + |c| < 0.999."""
    total = rng.uniform(0.0, 0.999)
    t = rng.uniform(0.0, 1.0)
    theta_s, theta_c = rng.uniform(0.0, 2.0 * math.pi, size=2)
    s = t * total * complex(math.cos(theta_s), math.sin(theta_s))
    c = (1.0 - t) * total * complex(math.cos(theta_c), math.sin(theta_c))
    return s, c


def random_triangular(rng, dim):
    """Upper-triangular matrix with diagonal moduli in [0.2, 1]."""
    moduli = rng.uniform(0.2, 1.0, size=dim)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=dim)
    T = np.triu(rng.uniform(-0.5, 0.5, size=(dim, dim)), 1).astype(np.complex128)
    T[np.diag_indices(dim)] = moduli * np.exp(1j * phases)
    return TruncatedOperator(T, 'random triangular dim={}'.format(dim))


@typechecked
def weyl_batch(count: int, seed: int = 0, m_max: int = 20, show_progress: bool = True) -> pd.DataFrame:
    """
    Weyl and |lambda_2n|^2 <= a_1 a_n checks on `count` random affine sections, every n.

    Returns
    -------
    pandas.DataFrame
        One row per (draw, n).
    """
    rng = np.random.default_rng(seed)
    rows = []
    for draw in progress(range(count), desc='Weyl checks', enabled=show_progress):
        s, c = random_affine(rng)
        m = int(rng.integers(1, m_max + 1))
        T = affine_symbol_matrix(s, c, m)
        for n in range(1, T.dim + 1):
            result = weyl_check(T, n)
            rows.append({
                'draw': draw, 's': format_complex(s), 'c': format_complex(c), 'm': m, 'n': n,
                'prod_eigs': result.prod_eigs, 'prod_sv': result.prod_sv,
                'hw_ok': result.hw_ok, 'ok': result.ok,
            })
    return pd.DataFrame(rows)


@typechecked
def kron_batch(count: int, seed: int = 0, max_dim: int = 8, tol: float = 1e-8, show_progress: bool = True) -> pd.DataFrame:
    """Tensor-spectrum inclusion on `count` random triangular pairs of dims 1..max_dim."""
    rng = np.random.default_rng(seed)
    rows = []
    for draw in progress(range(count), desc='Kronecker checks', enabled=show_progress):
        d1, d2 = (int(d) for d in rng.integers(1, max_dim + 1, size=2))
        T1 = random_triangular(rng, d1)
        T2 = random_triangular(rng, d2)
        result = kron_spectrum_check(T1, T2, tol)
        rows.append({
            'draw': draw, 'dim1': d1, 'dim2': d2, 'max_distance': result.max_distance,
            'commute_ok': result.commute_ok, 'ok': result.ok,
        })
    return pd.DataFrame(rows)


@typechecked
def norm_bound_batch(count: int, seed: int = 0, m: int = 40, show_progress: bool = True) -> pd.DataFrame:
    """
    Norm bound on `count` random admissible symbols.

    `monotone` records that the section norms at degrees 5, 10, 20, ... up to m
    never decrease.
    """
    rng = np.random.default_rng(seed)
    degrees = sorted({k for k in (5, 10, 20) if k < m} | {m})
    rows = []
    for draw in progress(range(count), desc='Norm bounds', enabled=show_progress):
        s, c = random_affine(rng)
        norms = [norm_bound_check(s, c, k)[0] for k in degrees]
        norm, bound, ok = norm_bound_check(s, c, m)
        monotone = all(later >= earlier * (1.0 - 1e-12) for earlier, later in zip(norms, norms[1:]))
        rows.append({
            'draw': draw, 's': format_complex(s), 'c': format_complex(c), 'm': m,
            'norm': norm, 'bound': bound, 'ok': ok, 'monotone': monotone,
        })
    return pd.DataFrame(rows)
