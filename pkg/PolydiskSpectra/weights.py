import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from errors import NonCompactWarning, WeightDomainError, WeightIndexError, WeightSpecError
from helper import format_real, option, typechecked


KINDS = ('list', 'geometric', 'linear', 'tower')
_PARAMETER_NAMES = {'geometric': 'rho', 'linear': 'beta', 'tower': 'alpha'}
_PARAMETER_RE = re.compile(r'^([a-z]+)=(.+)$')


@dataclass(frozen=True)
class WeightSequence:
    """
    Eigenvalues (lambda_j) of a diagonal symbol, kept as exponents A_j = log(1/lambda_j).

    Attributes
    ----------
    kind : str
        One of 'list', 'geometric', 'linear', 'tower'.
    parameter : float or None
        rho, beta or alpha for the generator kinds.
    exponents : tuple of float
        Sorted exponents of an explicit list (empty for generators).
    permutation : tuple of int
        permutation[i] is the position in the input list of the i-th largest weight.
    values : tuple of float
        Explicit list values in input order.

    Methods
    -------
    log_weight(j)
        A_j, evaluated straight from the generator formula.
    eigenvalue(j)
        lambda_j = exp(-A_j), for display only.
    head(n)
        First n exponents as an array.
    exponent_block(start, stop)
        A_start..A_stop as an array, for vectorized sums.
    """

    kind: str
    parameter: Optional[float] = None
    exponents: Tuple[float, ...] = ()
    permutation: Tuple[int, ...] = ()
    values: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def effective_length(self):
        """Number of weights of an explicit list, None for generator kinds."""
        if self.kind == 'list':
            return len(self.exponents)
        return None

    @property
    def spec(self):
        """Canonical weight-spec string that rebuilds this sequence."""
        if self.kind == 'list':
            return 'list:' + ','.join(format_real(v) for v in self.values)
        return '{}:{}={}'.format(self.kind, _PARAMETER_NAMES[self.kind], format_real(self.parameter))

    def in_range(self, j):
        return j >= 1 and (self.kind != 'list' or j <= len(self.exponents))

    def log_weight(self, j):
        """
        Exponent A_j = log(1/lambda_j).

        Parameters
        ----------
        j : int
            Coordinate index, starting at 1.

        Returns
        -------
        float
            A_j > 0. Tower exponents too large for a double come back as inf.
        """
        if j < 1:
            raise WeightIndexError(j, self.effective_length)
        kind = self.kind
        if kind == 'linear':
            return self.parameter * j
        if kind == 'geometric':
            return j * -math.log(self.parameter)
        if kind == 'tower':
            try:
                return math.exp(j ** self.parameter)
            except OverflowError:
                return math.inf
        if j > len(self.exponents):
            raise WeightIndexError(j, len(self.exponents))
        return self.exponents[j - 1]

    def eigenvalue(self, j):
        return math.exp(-self.log_weight(j))

    def head(self, n):
        """First min(n, length) exponents as a float array."""
        return self.exponent_block(1, n)

    def exponent_block(self, start, stop):
        """A_j for start <= j <= stop as a float array, cut at the end of an explicit list."""
        if start < 1:
            raise WeightIndexError(start, self.effective_length)
        if self.kind == 'list':
            return np.array(self.exponents[start - 1:stop], dtype=np.float64)
        j = np.arange(start, stop + 1, dtype=np.float64)
        if self.kind == 'linear':
            return self.parameter * j
        if self.kind == 'geometric':
            return j * -math.log(self.parameter)
        with np.errstate(over='ignore'):
            return np.exp(j ** self.parameter)


def _parse_parameter(spec, kind, body):
    match = _PARAMETER_RE.match(body.strip())
    if match is None:
        raise WeightSpecError(spec, body)
    name, raw = match.groups()
    if name != _PARAMETER_NAMES[kind]:
        raise WeightSpecError(spec, name)
    try:
        value = float(raw)
    except ValueError:
        raise WeightSpecError(spec, raw) from None
    if not math.isfinite(value):
        raise WeightSpecError(spec, raw)
    return value


def _from_list(spec, body):
    tokens = body.split(',')
    values = []
    for index, token in enumerate(tokens, start=1):
        try:
            value = float(token.strip())
        except ValueError:
            raise WeightSpecError(spec, token) from None
        if not 0.0 < value < 1.0:
            raise WeightDomainError(index, value)
        values.append(value)

    permutation = tuple(sorted(range(len(values)), key=lambda i: -values[i]))
    exponents = tuple(-math.log(values[i]) for i in permutation)

    if len(values) >= option(None, 'weights', 'constant_list_warning', int) and len(set(values)) == 1:
        warnings.warn(
            'explicit list of {} identical weights {}: this behaves like a dilation, '
            'not like a compact symbol'.format(len(values), values[0]),
            NonCompactWarning,
        )
    return WeightSequence('list', None, exponents, permutation, tuple(values))


@typechecked
def make_weights(spec: str) -> WeightSequence:
    """
    Build a weight sequence from its spec string.

    Grammar: `list:v1,v2,...` | `geometric:rho=R` | `linear:beta=B` | `tower:alpha=A`.

    Parameters
    ----------
    spec : str
        Weight spec.

    Returns
    -------
    WeightSequence
        Validated sequence; explicit lists are sorted (non-increasing weights).
    """
    kind, sep, body = spec.strip().partition(':')
    if not sep or kind not in KINDS:
        raise WeightSpecError(spec, kind)
    if not body.strip():
        raise WeightSpecError(spec, body)

    if kind == 'list':
        return _from_list(spec, body)

    value = _parse_parameter(spec, kind, body)
    if kind == 'geometric' and not 0.0 < value < 1.0:
        raise WeightDomainError(1, value)
    if kind == 'linear' and value <= 0.0:
        raise WeightDomainError(1, math.exp(-value))
    if kind == 'tower' and value <= 0.0:
        raise WeightSpecError(spec, body)
    return WeightSequence(kind, value)


@typechecked
def log_weight(w: WeightSequence, j: int) -> float:
    """A_j of `w`; see WeightSequence.log_weight."""
    return w.log_weight(j)
