import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

from errors import ResourceLimitError, WeightIndexError
from helper import option, typechecked
from weights import WeightSequence


@dataclass(frozen=True)
class MultiIndex:
    """
    Finitely supported multi-index alpha in N^(oo), stored sparsely.

    `entries` holds (j, alpha_j) pairs with alpha_j >= 1 and j increasing;
    coordinates that are absent are zero.
    """

    entries: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        previous = 0
        for j, a in self.entries:
            if j <= previous or a < 1:
                raise ValueError('multi-index entries must have increasing coordinates and exponents >= 1: {}'.format(self.entries))
            previous = j

    @classmethod
    def zero(cls):
        return cls(())

    @classmethod
    def from_mapping(cls, mapping):
        """Build from {j: alpha_j}; zero exponents are dropped."""
        return cls(tuple((j, a) for j, a in sorted(mapping.items()) if a != 0))

    @classmethod
    def from_exponents(cls, exponents):
        """Build from a dense vector (alpha_1, alpha_2, ...)."""
        return cls(tuple((j, int(a)) for j, a in enumerate(exponents, start=1) if a != 0))

    @classmethod
    def parse(cls, text):
        """Inverse of `to_text`: '1' is the zero index, else 'j1^a1*j2^a2*...'."""
        text = text.strip()
        if text == '1':
            return cls.zero()
        entries = []
        for factor in text.split('*'):
            j, sep, a = factor.partition('^')
            if not sep:
                raise ValueError('bad multi-index factor {!r} in {!r}'.format(factor, text))
            entries.append((int(j), int(a)))
        return cls(tuple(entries))

    @property
    def support(self):
        return tuple(j for j, _ in self.entries)

    @property
    def highest(self):
        """Largest coordinate in the support, 0 for the zero index."""
        return self.entries[-1][0] if self.entries else 0

    @property
    def degree(self):
        return sum(a for _, a in self.entries)

    def exponent(self, j):
        for k, a in self.entries:
            if k == j:
                return a
        return 0

    def order_key(self):
        """Tie-break key among equal log-values: support size, then textual form."""
        return len(self.entries), self.to_text()

    def to_text(self):
        if not self.entries:
            return '1'
        return '*'.join('{}^{}'.format(j, a) for j, a in self.entries)

    def __str__(self):
        return self.to_text()

    def __add__(self, other):
        merged = dict(self.entries)
        for j, a in other.entries:
            merged[j] = merged.get(j, 0) + a
        return MultiIndex.from_mapping(merged)

    def __bool__(self):
        return bool(self.entries)


class LatticePoint(NamedTuple):
    """Lattice point alpha together with log(1/lambda^alpha)."""

    index: MultiIndex
    log_value: float

    @property
    def eigenvalue(self):
        return math.exp(-self.log_value)


def log_value_of(exponents, entries):
    """
    Sum of alpha_j * A_j over `entries`, in increasing j.

    `exponents` is any callable j -> A_j. The fixed summation order makes the
    value of a multi-index identical wherever it is computed.
    """
    total = 0.0
    for j, a in entries:
        total += a * exponents(j)
    return total


@typechecked
def eval_log_eigenvalue(w: WeightSequence, alpha: MultiIndex) -> float:
    """
    log(1/lambda^alpha) = sum_j alpha_j A_j.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    alpha : MultiIndex
        Lattice point.

    Returns
    -------
    float
        Non-negative log-value, 0 exactly for the zero index.
    """
    if alpha.entries and not w.in_range(alpha.highest):
        raise WeightIndexError(alpha.highest, w.effective_length)
    return log_value_of(w.log_weight, alpha.entries)


@typechecked
def enumerate_box(
    w: WeightSequence,
    d: int,
    maxdeg: int,
    max_log_value: Optional[float] = None,
    cap: Optional[int] = None,
) -> list:
    """
    Brute-force every lattice point with support in {1..d} and alpha_j <= maxdeg.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    d : int
        Number of coordinates.
    maxdeg : int
        Largest exponent per coordinate.
    max_log_value : float, optional
        When given, only points with log-value <= max_log_value are returned and
        branches that already exceed it are pruned; the cap then applies to the
        number of points returned instead of the box size.
    cap : int, optional
        Size cap (default cone.box_cap).

    Returns
    -------
    list of LatticePoint
        Unsorted points.
    """
    if d < 1 or maxdeg < 0:
        raise ValueError('box needs d >= 1 and maxdeg >= 0, got d={} maxdeg={}'.format(d, maxdeg))
    if not w.in_range(d):
        raise WeightIndexError(d, w.effective_length)
    cap = option(cap, 'cone', 'box_cap', int)

    count = (maxdeg + 1) ** d
    if max_log_value is None and count > cap:
        raise ResourceLimitError('box of (maxdeg+1)^d points', count, cap)

    exponents = [w.log_weight(j) for j in range(1, d + 1)]
    limit = math.inf if max_log_value is None else max_log_value
    points = []
    _append = points.append

    # depth-first over coordinates; partial sums follow log_value_of exactly
    stack = [(1, (), 0.0)]
    _pop = stack.pop
    while stack:
        j, entries, total = _pop()
        if j > d:
            if len(points) >= cap:
                raise ResourceLimitError('points under the log-value ceiling', len(points) + 1, cap)
            _append(LatticePoint(MultiIndex(entries), total))
            continue
        a_j = exponents[j - 1]
        children = [(j + 1, entries, total)]
        for a in range(1, maxdeg + 1):
            value = total + a * a_j
            if value > limit:
                break
            children.append((j + 1, entries + ((j, a),), value))
        stack.extend(reversed(children))
    return points
