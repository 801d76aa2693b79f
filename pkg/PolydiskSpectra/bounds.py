import concurrent.futures
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from errors import LargeProductWarning, ResourceLimitError, WeightIndexError
from helper import format_log_value, format_real, option, typechecked
from rearrange import EigenvalueStream
from schatten import log_euler_product
from weights import WeightSequence, make_weights


D = math.pi ** 2 / 6.0
C_LINEAR = 1.0 / (4.0 * D)

_LOG_FLOAT_MAX = 709.0


@dataclass
class BoundReport:
    """
    Bound-versus-actual rows with the constants behind them.

    Attributes
    ----------
    bound_kind : str
        'optimized-linear', 'general-inf', 'supscha-profile', 'divergence',
        'power-decay' or 'cruci'.
    parameters : dict
        Constants used (D, c, delta, fitted c, ...).
    rows : list of dict
        One dict per row; log-space columns are plain floats.
    asserted : bool
        Whether the rows claim bound >= actual (slack >= 0).
    """

    bound_kind: str
    parameters: dict = field(default_factory=dict)
    rows: List[dict] = field(default_factory=list)
    asserted: bool = True

    @property
    def dominated(self):
        """True when every row has non-negative slack."""
        return all(row['slack'] >= 0.0 for row in self.rows if 'slack' in row)

    def constants_comment(self):
        parts = ['kind={}'.format(self.bound_kind)]
        for key, value in self.parameters.items():
            parts.append('{}={}'.format(key, format_real(value) if isinstance(value, float) else value))
        return 'constants: ' + ' '.join(parts)

    def to_frame(self):
        """
        Rows as a DataFrame.

        `log_a_N` and `log_bound` columns get `a_N` and `bound` companions holding
        exp() of them as text (exp(-L) strings past double range).
        """
        frame = pd.DataFrame(self.rows)
        for log_column, column in (('log_a_N', 'a_N'), ('log_bound', 'bound')):
            if log_column in frame.columns:
                position = frame.columns.get_loc(log_column) + 1
                frame.insert(position, column, [format_log_value(-value) for value in frame[log_column]])
        return frame


# ---------------------------------------------------------------- partitions


@typechecked
def partition_numbers(n_max: int, cap: Optional[int] = None) -> list:
    """
    Exact partition numbers p(0..n_max).

    Euler's pentagonal recurrence
    p(n) = sum_k (-1)^(k+1) [p(n - k(3k-1)/2) + p(n - k(3k+1)/2)]
    on Python integers.

    Parameters
    ----------
    n_max : int
        Largest argument.
    cap : int, optional
        Largest allowed n_max (default bounds.partition_cap).

    Returns
    -------
    list of int
    """
    if n_max < 0:
        raise ValueError('n_max must be >= 0, got {}'.format(n_max))
    cap = option(cap, 'bounds', 'partition_cap', int)
    if n_max > cap:
        raise ResourceLimitError('partition numbers requested', n_max, cap)

    p = [1] + [0] * n_max
    for n in range(1, n_max + 1):
        total = 0
        k = 1
        while True:
            g1 = n - k * (3 * k - 1) // 2
            if g1 < 0:
                break
            g2 = g1 - k
            term = p[g1] + (p[g2] if g2 >= 0 else 0)
            total += term if k % 2 else -term
            k += 1
        p[n] = total
    return p


@typechecked
def linear_level(N: int, cap: Optional[int] = None) -> int:
    """
    Level n with a_N = e^-n when A_j = j.

    The level-k points are the partitions of k, so n is the least level whose
    cumulative partition count reaches N.
    """
    if N < 1:
        raise ValueError('N must be >= 1, got {}'.format(N))
    cap = option(cap, 'bounds', 'partition_cap', int)
    chunk = 64
    while True:
        p = partition_numbers(min(chunk, cap), cap)
        cumulative = 0
        for n, count in enumerate(p):
            cumulative += count
            if cumulative >= N:
                return n
        if chunk >= cap:
            raise ResourceLimitError('partition levels needed for N={}'.format(N), chunk + 1, cap)
        chunk *= 2


# ---------------------------------------------------------------- eta


def _log_eta_inverse(x, cutoff):
    if x == 0.0:
        return 0.0
    terms = []
    n = 1
    one_minus_x = 1.0 - x
    while True:
        power = x ** n
        terms.append(-math.log1p(-power))
        if power / one_minus_x < cutoff:
            break
        n += 1
    return math.fsum(terms)


@typechecked
def eta_inverse(x: float, cutoff: Optional[float] = None) -> float:
    """
    eta(x) = prod_{n>=1} (1 - x^n)^-1 = sum_n p(n) x^n.

    Parameters
    ----------
    x : float
        0 <= x < 1.
    cutoff : float, optional
        Product stops once x^n / (1 - x) drops below it (default bounds.eta_cutoff).

    Returns
    -------
    float
    """
    if not 0.0 <= x < 1.0:
        raise ValueError('eta needs 0 <= x < 1, got {}'.format(x))
    cutoff = option(cutoff, 'bounds', 'eta_cutoff')
    return math.exp(_log_eta_inverse(x, cutoff))


@typechecked
def eta_series(x: float, n_max: int) -> float:
    """sum_{n<=n_max} p(n) x^n, the series side of eta."""
    if not 0.0 <= x < 1.0:
        raise ValueError('eta needs 0 <= x < 1, got {}'.format(x))
    p = partition_numbers(n_max)
    return math.fsum(count * x ** n for n, count in enumerate(p))


@typechecked
def eta_bound_check(r: float) -> tuple:
    """
    eta(e^-r) <= e^(D/r) with D = pi^2/6.

    Returns
    -------
    tuple
        (eta, bound, ok). The comparison is done on logs.
    """
    if r <= 0:
        raise ValueError('r must be positive, got {}'.format(r))
    log_eta = _log_eta_inverse(math.exp(-r), option(None, 'bounds', 'eta_cutoff'))
    log_bound = D / r
    eta = math.exp(log_eta) if log_eta < _LOG_FLOAT_MAX else math.inf
    bound = math.exp(log_bound) if log_bound < _LOG_FLOAT_MAX else math.inf
    return eta, bound, bool(log_eta <= log_bound)


# ---------------------------------------------------------------- linear bound


@typechecked
def optimized_bound_linear(N: int) -> float:
    """a_N <= exp(-(log N)^2 / (4D)) for A_j = j, from r = 2D / log N."""
    if N < 2:
        raise ValueError('N must be >= 2, got {}'.format(N))
    return math.exp(-math.log(N) ** 2 / (4.0 * D))


@typechecked
def pre_optimized_bound_linear(N: int, r: float) -> float:
    """exp(D/r^2 - log(N)/r), the linear bound before choosing r."""
    if N < 2:
        raise ValueError('N must be >= 2, got {}'.format(N))
    if r <= 0:
        raise ValueError('r must be positive, got {}'.format(r))
    exponent = D / r ** 2 - math.log(N) / r
    return math.exp(exponent) if exponent < _LOG_FLOAT_MAX else math.inf


# ---------------------------------------------------------------- log F


def _euler_product(w, r):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', LargeProductWarning)
        return log_euler_product(w, r, divergence_cap=math.inf)


@typechecked
def log_F(w: WeightSequence, r: float) -> float:
    """
    log F(r) = sum_n -log(1 - e^(-r A_n)).

    Truncated where the certified tail of the Euler product falls below
    schatten.tail_threshold.
    """
    return _euler_product(w, r).log_value


@typechecked
def log_F_upper(w: WeightSequence, r: float) -> float:
    """Certified upper bound for log F(r): truncated sum plus its tail bound."""
    product = _euler_product(w, r)
    return product.log_value + product.tail_log_bound


@typechecked
def log_F_double_sum(w: WeightSequence, r: float, tolerance: float = 1e-18) -> float:
    """
    log F(r) summed as sum_n sum_m e^(-r m A_n) / m.

    Rows stop once e^(-r m A_n) falls below `tolerance` times the row, and the
    outer sum stops once a whole row is below `tolerance` times the total.
    """
    if r <= 0:
        raise ValueError('r must be positive, got {}'.format(r))
    max_terms = option(None, 'schatten', 'max_terms', int)
    rows = []
    n = 0
    while w.in_range(n + 1):
        n += 1
        if n > max_terms:
            raise ResourceLimitError('double-sum rows', n, max_terms)
        step = r * w.log_weight(n)
        if math.isinf(step):
            break
        terms = []
        m = 1
        while True:
            power = math.exp(-step * m)
            terms.append(power / m)
            if power < tolerance * terms[0] or power == 0.0:
                break
            m += 1
        row = math.fsum(terms)
        rows.append(row)
        if row < tolerance * rows[0]:
            break
    return math.fsum(rows)


# ---------------------------------------------------------------- general bound


def _general_log_bound(w, N, x_max=None, xtol=None):
    x_max = option(x_max, 'bounds', 'x_max')
    xtol = option(xtol, 'bounds', 'golden_xtol')
    log_N = math.log(N)

    @functools.lru_cache(maxsize=None)
    def objective(x):
        try:
            return x * (log_F_upper(w, 1.0 / x) - log_N)
        except ResourceLimitError:
            # leaving x out only shrinks the set the infimum runs over
            return math.inf

    grid = [1.0]
    values = [objective(1.0)]
    increases = 0
    while grid[-1] * 2.0 <= x_max:
        x = grid[-1] * 2.0
        grid.append(x)
        values.append(objective(x))
        increases = increases + 1 if values[-1] > values[-2] else 0
        if increases >= 2:
            break

    best = int(np.argmin(values))
    best_x, best_value = grid[best], values[best]
    if math.isinf(best_value):
        return best_value, best_x

    f = lambda x: objective(float(x))
    try:
        if 0 < best < len(grid) - 1:
            result = minimize_scalar(
                f, bracket=(grid[best - 1], grid[best], grid[best + 1]), method='golden', tol=xtol
            )
        else:
            lower = grid[max(best - 1, 0)]
            upper = grid[min(best + 1, len(grid) - 1)]
            if upper <= lower:
                return best_value, best_x
            result = minimize_scalar(
                f, bounds=(lower, upper), method='bounded', options={'xatol': xtol * upper}
            )
    except ValueError:
        return best_value, best_x

    x_star = float(result.x)
    if 1.0 <= x_star <= x_max:
        value = objective(x_star)
        if value < best_value:
            best_x, best_value = x_star, value
    return best_value, best_x


@typechecked
def general_bound(w: WeightSequence, N: int) -> tuple:
    """
    inf over x of exp[x (log F(1/x) - log N)], an upper bound for a_N.

    x runs over [1, bounds.x_max]. The search doubles x from 1 until the objective
    rises twice in a row, then refines the best bracket with golden-section
    search. log F carries its certified tail, so the returned value is always a
    valid bound on a_N.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    N : int
        Rank, N >= 2.

    Returns
    -------
    tuple
        (bound, x_star). The bound may exceed 1 and is inf past double range.
    """
    if N < 2:
        raise ValueError('N must be >= 2, got {}'.format(N))
    log_bound, x_star = _general_log_bound(w, N)
    bound = math.exp(log_bound) if log_bound < _LOG_FLOAT_MAX else math.inf
    return bound, x_star


def _stream_log_values(w, N_list, show_progress=None):
    """log(1/a_N) for every N in N_list, from one stream."""
    wanted = sorted(set(N_list))
    stream = EigenvalueStream(w)
    found = {}
    n = 0
    for N in wanted:
        points = stream.take(N - n, show_progress=show_progress)
        n = N
        found[N] = points[-1].log_value
    return found


@typechecked
def linear_bound_report(N_list: list) -> BoundReport:
    """a_N = e^-level against exp(-(log N)^2 / (4D)) for A_j = j."""
    if not N_list:
        raise ValueError('N_list is empty')
    rows = []
    for N in N_list:
        if N < 2:
            raise ValueError('N must be >= 2, got {}'.format(N))
        level = linear_level(N)
        log_bound = -math.log(N) ** 2 / (4.0 * D)
        rows.append({'N': N, 'log_a_N': -float(level), 'log_bound': log_bound, 'slack': log_bound + level})
    return BoundReport('optimized-linear', {'D': D, 'c': C_LINEAR}, rows)


@typechecked
def general_bound_report(w: WeightSequence, N_list: list, show_progress: Optional[bool] = None) -> BoundReport:
    """Stream a_N against the general bound for each N."""
    if not N_list:
        raise ValueError('N_list is empty')
    if min(N_list) < 2:
        raise ValueError('N must be >= 2, got {}'.format(min(N_list)))
    actual = _stream_log_values(w, N_list, show_progress)
    rows = []
    for N in N_list:
        log_bound, x_star = _general_log_bound(w, N)
        rows.append({
            'N': N,
            'log_a_N': -actual[N],
            'log_bound': log_bound,
            'slack': log_bound + actual[N],
            'x_star': x_star,
        })
    return BoundReport('general-inf', {'weights': w.spec}, rows)


# ---------------------------------------------------------------- tower profile


@typechecked
def supscha_profile(
    alpha: float,
    N_list: list,
    include_general: bool = True,
    show_progress: Optional[bool] = None,
) -> BoundReport:
    """
    Decay profile of tower weights A_j = exp(j^alpha).

    For every N, a_N from the stream is set against the general bound and the
    explicit form exp(-c x_N), x_N = exp[(log(N/e))^delta], delta = alpha/(alpha+1).
    c is fitted as the largest constant (C = 1) with exp(-c x_N) >= a_N on
    N_list. `slope` is the diagnostic log log(1/a_N) / (log N)^delta.

    Parameters
    ----------
    alpha : float
        Tower parameter, 0 < alpha <= 1.
    N_list : list of int
        Ranks, all >= 3.
    include_general : bool
        Add the general bound and its slack to every row. Small alpha makes
        log F slow to converge, so it can be left out.

    Returns
    -------
    BoundReport
    """
    if not N_list:
        raise ValueError('N_list is empty')
    if not 0.0 < alpha <= 1.0:
        raise ValueError('alpha must be in (0, 1], got {}'.format(alpha))
    if min(N_list) < 3:
        raise ValueError('every N must be >= 3, got {}'.format(min(N_list)))

    w = make_weights('tower:alpha={}'.format(format_real(float(alpha))))
    delta = alpha / (alpha + 1.0)
    actual = _stream_log_values(w, N_list, show_progress)

    x_values = {N: math.exp(math.log(N / math.e) ** delta) for N in N_list}
    fitted_c = min(actual[N] / x_values[N] for N in N_list)

    rows = []
    for N in N_list:
        row = {'N': N, 'log_a_N': -actual[N]}
        if include_general:
            log_bound, _ = _general_log_bound(w, N)
            row.update(log_bound=log_bound, slack=log_bound + actual[N])
        row.update({
            'x_N': x_values[N],
            'log_profile': -fitted_c * x_values[N],
            'slope': math.log(actual[N]) / math.log(N) ** delta,
        })
        rows.append(row)
    return BoundReport('supscha-profile', {'alpha': float(alpha), 'delta': delta, 'C': 1.0, 'b': 1.0, 'fitted_c': fitted_c}, rows)


# ---------------------------------------------------------------- divergence


@typechecked
def divergence_partial_sums(w: WeightSequence, p: float, N: int, show_progress: Optional[bool] = None) -> tuple:
    """
    S_N(p) = sum_{2<=n<=N} 1 / log(1/delta_n)^p.

    n = 1 is left out since delta_1 = 1.

    Returns
    -------
    tuple
        (S, rows) where rows holds (n, S_n) at powers of two and at N.
    """
    if p <= 0:
        raise ValueError('p must be positive, got {}'.format(p))
    if N < 2:
        raise ValueError('N must be >= 2, got {}'.format(N))
    points = EigenvalueStream(w).take(N, show_progress=show_progress)
    total = 0.0
    rows = []
    checkpoint = 2
    for n in range(2, N + 1):
        total += points[n - 1].log_value ** -p
        if n == checkpoint or n == N:
            rows.append((n, total))
            if n == checkpoint:
                checkpoint *= 2
    return total, rows


@typechecked
def divergence_report(w: WeightSequence, p: float, N: int, show_progress: Optional[bool] = None) -> BoundReport:
    """
    Divergence partial sums alongside their even-index counterpart.

    `S_even` sums 1 / log(1/delta_(2k))^p over 2k <= n, the terms that
    |lambda_(2k)|^2 <= a_1 a_k transfers to singular numbers.
    """
    if p <= 0:
        raise ValueError('p must be positive, got {}'.format(p))
    if N < 2:
        raise ValueError('N must be >= 2, got {}'.format(N))
    points = EigenvalueStream(w).take(N, show_progress=show_progress)
    total = even = 0.0
    rows = []
    checkpoint = 2
    for n in range(2, N + 1):
        term = points[n - 1].log_value ** -p
        total += term
        if n % 2 == 0:
            even += term
        if n == checkpoint or n == N:
            rows.append({'n': n, 'S': total, 'S_even': even})
            if n == checkpoint:
                checkpoint *= 2
    return BoundReport('divergence', {'weights': w.spec, 'p': float(p)}, rows, asserted=False)


class TransferCheck(NamedTuple):
    ok: bool
    checked: int
    min_margin: float


@typechecked
def hw_transfer_check(w: WeightSequence, p: float, N: int, show_progress: Optional[bool] = None) -> TransferCheck:
    """
    (1 / (2 log(1/delta_2n)))^p <= (1 / log(1/(a_1 a_n)))^p for 2n <= N.

    With a = delta for diagonal symbols this reads log(1/a_1) + log(1/a_n) <=
    2 log(1/delta_2n), which is what gets compared. `min_margin` is the smallest
    2 L_2n - (L_1 + L_n).
    """
    if p <= 0:
        raise ValueError('p must be positive, got {}'.format(p))
    if N < 2:
        raise ValueError('N must be >= 2, got {}'.format(N))
    logs = [point.log_value for point in EigenvalueStream(w).take(N, show_progress=show_progress)]
    ok = True
    margin = math.inf
    checked = 0
    for n in range(1, N // 2 + 1):
        gap = 2.0 * logs[2 * n - 1] - (logs[0] + logs[n - 1])
        margin = min(margin, gap)
        ok = ok and gap >= 0.0
        checked += 1
    return TransferCheck(ok, checked, margin)


@typechecked
def power_decay_comparison(w: WeightSequence, p: float, N: int, b: float = 1.0) -> BoundReport:
    """
    Divergence sums of the stream next to those of a_n = exp(-n^b).

    For such a power profile sum 1 / log(1/a_n)^p = sum n^(-bp) converges when
    bp > 1, which the stream sums should not mirror.
    """
    if b <= 0:
        raise ValueError('b must be positive, got {}'.format(b))
    _, stream_rows = divergence_partial_sums(w, p, N)
    rows = []
    for n, total in stream_rows:
        power_total = math.fsum(float(k) ** (-b * p) for k in range(2, n + 1))
        rows.append({'n': n, 'S': total, 'S_power': power_total})
    return BoundReport('power-decay', {'weights': w.spec, 'p': float(p), 'b': float(b)}, rows, asserted=False)


# ---------------------------------------------------------------- cruci


class CruciResult(NamedTuple):
    lhs: float
    rhs: float
    ok: bool
    failures: int
    C_q: float
    q: int
    points: int


def _cruci_chunk(first, exponents, M, p, C_q):
    q = len(exponents)
    rest = (np.indices((M,) * (q - 1)).reshape(q - 1, -1).T + 1).astype(np.float64)
    alpha = np.empty((rest.shape[0], q), dtype=np.float64)
    alpha[:, 0] = first
    alpha[:, 1:] = rest
    s = alpha @ exponents
    norm2 = np.sum(alpha * alpha, axis=1)
    failures = int(np.count_nonzero(s > C_q * norm2))
    return math.fsum(s ** -p), math.fsum(norm2 ** -p), failures


@typechecked
def cruci_lowerbound_check(
    w: WeightSequence,
    p: int,
    M: int,
    cap: Optional[int] = None,
    workers: Optional[int] = None,
) -> CruciResult:
    """
    Lower-bound chain over the box alpha in {1..M}^q, q = 2p.

    Each term must satisfy 1 / (sum_j alpha_j A_j)^p >= C_q^-p / ||alpha||^(2p)
    with C_q = sum_{j<=q} A_j^2, checked as sum_j alpha_j A_j <= C_q ||alpha||^2
    without tolerance. Failed terms are counted, not raised.

    Parameters
    ----------
    w : WeightSequence
        Weights, at least q of them.
    p : int
        Exponent p >= 1.
    M : int
        Largest coordinate in the box.
    cap : int, optional
        Max box size M^q (default bounds.cruci_cap).
    workers : int, optional
        Threads, one chunk per alpha_1 (default bounds.workers).

    Returns
    -------
    CruciResult
        lhs = sum 1/(sum alpha_j A_j)^p and rhs = C_q^-p sum 1/||alpha||^q; ok when
        no term failed and lhs >= rhs.
    """
    if p < 1 or M < 1:
        raise ValueError('need p >= 1 and M >= 1, got p={} M={}'.format(p, M))
    q = 2 * p
    if not w.in_range(q):
        raise WeightIndexError(q, w.effective_length)
    cap = option(cap, 'bounds', 'cruci_cap', int)
    workers = option(workers, 'bounds', 'workers', int)
    size = M ** q
    if size > cap:
        raise ResourceLimitError('cruci box M^q', size, cap)

    exponents = w.head(q)
    C_q = float(np.sum(exponents ** 2))

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_cruci_chunk, first, exponents, M, p, C_q) for first in range(1, M + 1)]
        # reduce in alpha_1 order so sums do not depend on scheduling
        chunks = [future.result() for future in futures]

    lhs = math.fsum(chunk[0] for chunk in chunks)
    rhs = C_q ** -p * math.fsum(chunk[1] for chunk in chunks)
    failures = sum(chunk[2] for chunk in chunks)
    return CruciResult(lhs, rhs, failures == 0 and lhs >= rhs, failures, C_q, q, size)


@typechecked
def cruci_report(w: WeightSequence, p: int, M_list: list) -> BoundReport:
    """cruci_lowerbound_check for every M in M_list."""
    if not M_list:
        raise ValueError('M_list is empty')
    rows = []
    result = None
    for M in M_list:
        result = cruci_lowerbound_check(w, p, M)
        rows.append({'M': M, 'lhs': result.lhs, 'rhs': result.rhs, 'ok': result.ok, 'failures': result.failures, 'points': result.points})
    return BoundReport('cruci', {'weights': w.spec, 'p': p, 'q': result.q, 'C_q': result.C_q}, rows, asserted=False)
