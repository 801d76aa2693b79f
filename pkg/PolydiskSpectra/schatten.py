import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from errors import LargeProductWarning, ResourceLimitError, SchattenDivergenceError
from helper import option, typechecked
from rearrange import EigenvalueStream
from weights import WeightSequence


# exp overflows past this
_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)


class EulerProduct(NamedTuple):
    """
    Truncated Euler product prod_{j<=J} (1 - lambda_j^p)^-1 kept in log-space.

    `tail_log_bound` bounds the log of the neglected factors, so the full product
    lies in [exp(log_value), exp(log_value + tail_log_bound)].
    """

    log_value: float
    tail_log_bound: float
    J: int
    power_sum: float

    @property
    def value(self):
        if self.log_value > _LOG_FLOAT_MAX:
            return math.inf
        return math.exp(self.log_value)

    @property
    def tail_bound(self):
        """Relative bound exp(tail) - 1 on the neglected factors."""
        return math.expm1(self.tail_log_bound)


@dataclass
class SchattenReport:
    """Partial sums of the rearranged eigenvalues against the Euler product."""

    p: float
    membership: str
    product_value: float
    log_product: float
    partial_sum: float
    tail_bound: float
    N_used: int
    J_used: int
    consistent: bool

    @property
    def gap(self):
        return self.product_value - self.partial_sum

    def to_dict(self):
        data = asdict(self)
        data['gap'] = self.gap
        return data


def _one_minus_exp(x):
    # 1 - exp(-x) without cancellation for small x
    return -math.expm1(-x)


def _tower_tail_sum(w, p, J):
    """
    Upper bound for sum_{j>J} exp(-p A_j) with A_j = exp(j^alpha).

    The terms decrease, so the sum is at most the integral from J. With
    u = t^alpha it becomes (1/alpha) int u^m e^(-p e^u) du, m = 1/alpha - 1, and
    u^m e^(-u) <= K on [J^alpha, oo) gives the bound K e^(-p A_J) / (alpha p).
    """
    alpha = w.parameter
    a_J = w.log_weight(J)
    if math.isinf(a_J):
        return 0.0
    m = 1.0 / alpha - 1.0
    u = max(J ** alpha, m)
    log_K = m * math.log(u) - u
    return math.exp(log_K - p * a_J - math.log(alpha * p))


def tail_power_sum(w, p, J):
    """
    Upper bound S for sum_{j>J} lambda_j^p.

    Exact geometric series for linear and geometric weights, the integral
    comparison for towers, and the exact remainder for explicit lists.
    """
    if w.kind in ('linear', 'geometric'):
        b = w.log_weight(1)
        return math.exp(-p * b * (J + 1)) / _one_minus_exp(p * b)
    if w.kind == 'tower':
        return _tower_tail_sum(w, p, J)
    return math.fsum(math.exp(-p * a) for a in w.exponents[J:])


def _tail_log_bound(w, p, J):
    if w.kind == 'list' and J >= len(w.exponents):
        return 0.0
    s = tail_power_sum(w, p, J)
    if s == 0.0:
        return 0.0
    # every neglected x_j = lambda_j^p is <= x_J, and -log(1 - x) <= x / (1 - x)
    return s / _one_minus_exp(p * w.log_weight(max(J, 1)))


@typechecked
def log_euler_product(
    w: WeightSequence,
    p: float,
    J: Optional[int] = None,
    divergence_cap: Optional[float] = None,
) -> EulerProduct:
    """
    log prod_{j<=J} (1 - lambda_j^p)^-1 with a certified tail bound.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    p : float
        Exponent, p > 0.
    J : int, optional
        Number of factors. When omitted, J covers a whole explicit list, and for
        generator kinds it doubles until the relative tail bound drops below
        schatten.tail_threshold.
    divergence_cap : float, optional
        sum_j lambda_j^p above this is reported as divergence (default schatten.divergence_cap).

    Returns
    -------
    EulerProduct
    """
    if p <= 0:
        raise ValueError('p must be positive, got {}'.format(p))
    divergence_cap = option(divergence_cap, 'schatten', 'divergence_cap')
    max_terms = option(None, 'schatten', 'max_terms', int)
    tail_threshold = option(None, 'schatten', 'tail_threshold')

    if J is not None:
        if J < 1:
            raise ValueError('J must be >= 1, got {}'.format(J))
        if w.kind == 'list':
            J = min(J, len(w.exponents))
    elif w.kind == 'list':
        J = len(w.exponents)
    if J is not None and J > max_terms:
        raise ResourceLimitError('Euler product factors', J, max_terms)

    # factors are added one block at a time: 1..16, 17..32, 33..64, ...
    log_sums = []
    power_sums = []
    start = 1
    stop = J if J is not None else 16
    while True:
        a = w.exponent_block(start, stop)
        overflow = np.flatnonzero(np.isinf(a))
        if overflow.size:
            # A_j = inf: this factor is exactly 1 and so is every later one
            a = a[:overflow[0] + 1]
            stop = start + overflow[0]
        x = np.exp(-p * a)
        log_sums.append(float(np.sum(-np.log(-np.expm1(-p * a)))))
        power_sums.append(float(np.sum(x)))
        if math.fsum(power_sums) > divergence_cap:
            raise SchattenDivergenceError(p, math.fsum(power_sums))

        if J is not None and stop >= J:
            break
        if overflow.size:
            J = stop
            break
        if math.expm1(_tail_log_bound(w, p, stop)) < tail_threshold:
            J = stop
            break
        start, stop = stop + 1, 2 * stop
        if stop > max_terms:
            raise ResourceLimitError('Euler product factors', stop, max_terms)

    tail = _tail_log_bound(w, p, J)
    total_power = math.fsum(power_sums)
    if w.kind != 'list' and total_power + tail_power_sum(w, p, J) > divergence_cap:
        raise SchattenDivergenceError(p, total_power + tail_power_sum(w, p, J))

    log_value = math.fsum(log_sums)
    if log_value > option(None, 'schatten', 'large_log_product'):
        warnings.warn(
            'Euler product exp({:.6g}) is huge: the weights barely decay at p={}'.format(log_value, p),
            LargeProductWarning,
        )
    return EulerProduct(log_value, tail, J, total_power)


@typechecked
def schatten_power_sum(w: WeightSequence, p: float, J: Optional[int] = None) -> tuple:
    """
    sum_n a_n^p of the diagonal operator, as its Euler product.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    p : float
        Exponent, p > 0.
    J : int, optional
        Number of factors; automatic when omitted.

    Returns
    -------
    tuple
        (value, tail_bound) with value = prod_{j<=J}(1 - lambda_j^p)^-1 (inf past
        double range) and tail_bound = exp(sum_{j>J} lambda_j^p / (1 - lambda_J^p)) - 1.
    """
    product = log_euler_product(w, p, J)
    return product.value, product.tail_bound


@typechecked
def is_in_schatten(w: WeightSequence, p: float) -> bool:
    """
    Whether sum_j lambda_j^p < oo, so that C_phi is in S_p.

    Every supported kind decays at least geometrically, so the answer is yes for
    every p > 0.
    """
    if p <= 0:
        raise ValueError('p must be positive, got {}'.format(p))
    return w.kind in ('list', 'geometric', 'linear', 'tower')


@typechecked
def partial_sum_vs_product(w: WeightSequence, p: float, N: int, show_progress: Optional[bool] = None) -> SchattenReport:
    """
    Stream N eigenvalues and compare sum_{n<=N} delta_n^p with the Euler product.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    p : float
        Exponent, p > 0.
    N : int
        Number of streamed terms.

    Returns
    -------
    SchattenReport
        `consistent` is False if the partial sum ever exceeds the product (1 + 1e-9).
    """
    if N < 1:
        raise ValueError('N must be >= 1, got {}'.format(N))
    membership = 'yes' if is_in_schatten(w, p) else 'no'
    product = log_euler_product(w, p)

    stream = EigenvalueStream(w)
    points = stream.take(N, show_progress=show_progress)
    partial = math.fsum(math.exp(-p * point.log_value) for point in points)

    upper = product.value * (1.0 + 1e-9)
    return SchattenReport(
        p=float(p),
        membership=membership,
        product_value=product.value,
        log_product=product.log_value,
        partial_sum=partial,
        tail_bound=product.tail_bound,
        N_used=N,
        J_used=product.J,
        consistent=bool(partial <= upper * (1.0 + product.tail_bound)),
    )


@typechecked
def kernel_norm_squared(z) -> float:
    """
    ||k_z||^2 = sum_alpha |z^alpha|^2 = prod_j (1 - |z_j|^2)^-1.

    Parameters
    ----------
    z : array_like
        Finitely many coordinates of a point of the polydisk, |z_j| < 1.

    Returns
    -------
    float
    """
    moduli = np.abs(np.asarray(z, dtype=np.complex128).ravel())
    if np.any(moduli >= 1.0):
        raise ValueError('point is not inside the polydisk: max |z_j| = {}'.format(moduli.max()))
    return float(np.exp(-np.sum(np.log1p(-moduli ** 2))))
