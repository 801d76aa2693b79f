"""Exceptions and warnings raised by the spectral toolkit."""


class SpectraError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class WeightSpecError(SpectraError, ValueError):
    """A weight spec string does not follow the grammar."""

    def __init__(self, spec, token):
        self.spec = spec
        self.token = token
        super().__init__(f"cannot parse weight spec {spec!r}: bad token {token!r}")


class WeightDomainError(SpectraError, ValueError):
    """Some weight lambda_j is outside (0, 1)."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"weight #{index} = {value!r} is not in (0, 1)")


class WeightIndexError(SpectraError, IndexError):
    """Coordinate index outside an explicit weight list."""

    def __init__(self, index, length):
        self.index = index
        self.length = length
        super().__init__(f"coordinate {index} is outside the weight list (length {length})")


class ResourceLimitError(SpectraError):
    """A configured size cap would be exceeded."""

    def __init__(self, what, count, cap):
        self.what = what
        self.count = count
        self.cap = cap
        super().__init__(f"{what}: {count} exceeds the configured cap of {cap}")


class FrontierOverflowError(ResourceLimitError):
    """The rearrangement frontier outgrew its cap."""

    def __init__(self, size, cap, emitted_count):
        self.emitted_count = emitted_count
        super().__init__("stream frontier size", size, cap)
        self.args = (f"{self.args[0]} (after {emitted_count} emitted points)",)


class SchattenDivergenceError(SpectraError):
    """sum_j lambda_j^p looks divergent; no product value is returned."""

    def __init__(self, p, partial):
        self.p = p
        self.partial = partial
        super().__init__(f"sum of lambda_j^{p} exceeds {partial:.6g}: treated as divergent")


class SelfMapError(SpectraError, ValueError):
    """Symbol parameters do not certify a self-map of the disk."""


class NonCompactWarning(UserWarning):
    """Weights that look like a constant dilation (no decay)."""


class LargeProductWarning(UserWarning):
    """Euler product so large that the operator is far from compact-like behaviour."""


class EigenResidualError(SpectraError):
    """Computed eigenpairs fail the residual check ||Tv - lambda v|| <= tol ||T||."""

    def __init__(self, residual, limit):
        self.residual = residual
        self.limit = limit
        super().__init__(f"eigenpair residual {residual:.3e} exceeds {limit:.3e}")
