import heapq
import json
import math
from typing import Optional

from cone import LatticePoint, MultiIndex, log_value_of
from errors import FrontierOverflowError
from helper import option, progress, typechecked
from weights import WeightSequence, make_weights


_heappop = heapq.heappop
_heappush = heapq.heappush
_max = max


def _tie_key(entries):
    return MultiIndex(entries).order_key()


class EigenvalueStream:
    """
    Lazy non-increasing rearrangement (delta_n) of the lattice {lambda^alpha}.

    Points are produced in non-decreasing log-value order. Points with exactly
    the same log-value (no tolerance) form a level; a level is drained from the
    frontier as a whole and emitted by support size, then by textual form.

    Every non-zero alpha has one parent alpha - e_h (h the highest coordinate of
    alpha), and the children beta + e_j, j >= h(beta), of a point beta are
    visited through sibling links: popping beta pushes its first child
    beta + e_h(beta), and popping a child beta + e_j pushes the next sibling
    beta + e_(j+1). Each multi-index is pushed exactly once and the frontier
    grows by at most one entry per pop. The sibling chain of the zero index
    keeps e_(active_dim + 1) in the frontier at all times, which is how new
    coordinates are activated.

    Attributes
    ----------
    weights : WeightSequence
        Weights being rearranged.
    frontier : list
        Heap of (log_value, support size, entries) candidates.
    pending : list
        Rest of the current level, (log_value, entries) with the next point last.
    active_dim : int
        Highest coordinate pushed so far.
    emitted_count : int
        Number of points popped.
    last_log_value : float or None
        Log-value of the last pop.

    Methods
    -------
    next()
        Pops the next lattice point.
    take(n)
        Pops n points.
    copy()
        Independent continuation of the stream.
    to_dict()
        Snapshot of the stream state.
    from_dict(data)
        Rebuilds a stream from a snapshot.
    save_to_file(filename)
        Saves a snapshot as JSON.
    load_from_file(filename)
        Loads a snapshot from JSON.
    """

    def __init__(self, weights, frontier_cap=None):
        """
        Start a stream whose first pop is the zero multi-index (eigenvalue 1).

        Parameters
        ----------
        weights : WeightSequence
            Weights to rearrange.
        frontier_cap : int, optional
            Max number of frontier entries (default stream.frontier_cap).
        """
        self.weights = weights
        self.frontier_cap = option(frontier_cap, 'stream', 'frontier_cap', int)
        self.frontier = [(0.0, 0, ())]
        self.pending = []
        self.active_dim = 0
        self.emitted_count = 0
        self.last_log_value = None
        self._exponents = {}

    def _exponent(self, j):
        value = self._exponents.get(j)
        if value is None:
            value = self._exponents[j] = self.weights.log_weight(j)
        return value

    def _available(self, j):
        # coordinates past an explicit list, or with exponents beyond double range, never appear
        return self.weights.in_range(j) and math.isfinite(self._exponent(j))

    def __iter__(self):
        return self

    def __next__(self):
        return self.next()

    def next(self):
        """
        Pop the next point of the rearrangement.

        Returns
        -------
        LatticePoint
            Next multi-index and its log-value.
        """
        if not self.pending:
            self._drain_level()
        value, entries = self.pending.pop()
        self.emitted_count += 1
        self.last_log_value = value
        return LatticePoint(MultiIndex(entries), value)

    def _drain_level(self):
        # pops every frontier entry with exactly the minimum value; entries of that
        # value pushed meanwhile are drained too, so the level is complete
        frontier = self.frontier
        level = []
        value = frontier[0][0]
        while frontier and frontier[0][0] == value:
            if len(frontier) >= self.frontier_cap:
                raise FrontierOverflowError(len(frontier) + 1, self.frontier_cap, self.emitted_count)
            _, _, entries = _heappop(frontier)
            self._expand(entries, value)
            level.append(entries)
        level.sort(key=_tie_key, reverse=True)
        self.pending = [(value, entries) for entries in level]

    def _expand(self, entries, value):
        if not entries:
            if self._available(1):
                self._push(((1, 1),), value)
                self.active_dim = _max(self.active_dim, 1)
            return
        h, a = entries[-1]
        self._push(entries[:-1] + ((h, a + 1),), value)
        if self._available(h + 1):
            if a == 1:
                sibling = entries[:-1] + ((h + 1, 1),)
            else:
                sibling = entries[:-1] + ((h, a - 1), (h + 1, 1))
            self._push(sibling, value)
            self.active_dim = _max(self.active_dim, h + 1)

    def _push(self, entries, floor):
        # children never sort before the point that pushed them, even after rounding
        value = _max(log_value_of(self._exponent, entries), floor)
        _heappush(self.frontier, (value, len(entries), entries))

    def take(self, n, show_progress=None):
        """
        Pop `n` points.

        Parameters
        ----------
        n : int
            Number of points.
        show_progress : bool, optional
            Progress bar; defaults to on for long takes.

        Returns
        -------
        list of LatticePoint
        """
        if show_progress is None:
            show_progress = n > option(None, 'stream', 'progress_every', int)
        _next = self.next
        return [_next() for _ in progress(range(n), desc='Streaming lattice points', enabled=show_progress)]

    def copy(self):
        """Independent stream continuing from the same state."""
        clone = EigenvalueStream(self.weights, self.frontier_cap)
        clone.frontier = list(self.frontier)
        clone.pending = list(self.pending)
        clone.active_dim = self.active_dim
        clone.emitted_count = self.emitted_count
        clone.last_log_value = self.last_log_value
        clone._exponents = dict(self._exponents)
        return clone

    def to_dict(self):
        """
        Converts the stream state to a dictionary format.

        Returns
        -------
        dict
            JSON-friendly snapshot; floats survive a JSON round trip exactly.
        """
        return {
            'weights': self.weights.spec,
            'frontier_cap': self.frontier_cap,
            'active_dim': self.active_dim,
            'emitted_count': self.emitted_count,
            'last_log_value': self.last_log_value,
            'frontier': [[value, [list(pair) for pair in entries]] for value, _, entries in self.frontier],
            'pending': [[value, [list(pair) for pair in entries]] for value, entries in self.pending],
        }

    @classmethod
    def from_dict(cls, data):
        """
        Loads a stream from a dictionary snapshot.

        Parameters
        ----------
        data : dict
            Output of `to_dict`.

        Returns
        -------
        EigenvalueStream
        """
        stream = cls(make_weights(data['weights']), data['frontier_cap'])
        frontier = []
        for value, pairs in data['frontier']:
            entries = tuple((int(j), int(a)) for j, a in pairs)
            frontier.append((float(value), len(entries), entries))
        # a saved heap list is still a valid heap
        stream.frontier = frontier
        stream.pending = [
            (float(value), tuple((int(j), int(a)) for j, a in pairs)) for value, pairs in data.get('pending', [])
        ]
        stream.active_dim = data['active_dim']
        stream.emitted_count = data['emitted_count']
        stream.last_log_value = data['last_log_value']
        return stream

    def save_to_file(self, filename):
        """
        Saves the stream state to a file in JSON format.

        Parameters
        ----------
        filename : str
            Path to save the JSON file.
        """
        with open(filename, 'w') as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load_from_file(cls, filename):
        """
        Loads a stream from a JSON file.

        Parameters
        ----------
        filename : str
            Path of the JSON file to load.
        """
        with open(filename, 'r') as f:
            return cls.from_dict(json.load(f))


@typechecked
def stream_new(w: WeightSequence, frontier_cap: Optional[int] = None) -> EigenvalueStream:
    return EigenvalueStream(w, frontier_cap)


@typechecked
def stream_next(s: EigenvalueStream) -> LatticePoint:
    return s.next()


@typechecked
def nth_point(w: WeightSequence, N: int, frontier_cap: Optional[int] = None) -> LatticePoint:
    """N-th point (1-based) of the rearrangement."""
    if N < 1:
        raise ValueError('N must be >= 1, got {}'.format(N))
    stream = EigenvalueStream(w, frontier_cap)
    stream.take(N - 1)
    return stream.next()


@typechecked
def approximation_number(w: WeightSequence, N: int, frontier_cap: Optional[int] = None) -> tuple:
    """
    a_N of the diagonal composition operator with weights `w`.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    N : int
        Rank, N >= 1.

    Returns
    -------
    tuple
        (a_N, witness multi-index). a_N underflows to 0.0 for log-values past ~745;
        use `nth_point` for the log-value.
    """
    point = nth_point(w, N, frontier_cap)
    return point.eigenvalue, point.index


@typechecked
def count_at_least(w: WeightSequence, t: float, tolerance: Optional[float] = None) -> int:
    """
    #{alpha : lambda^alpha >= t}.

    Parameters
    ----------
    w : WeightSequence
        Weights.
    t : float
        Threshold in (0, 1].
    tolerance : float, optional
        Absolute log-space tolerance (default rearrange.count_tolerance); points
        within it of log(1/t) are counted in.

    Returns
    -------
    int
    """
    if not 0.0 < t <= 1.0:
        raise ValueError('threshold must be in (0, 1], got {}'.format(t))
    tolerance = option(tolerance, 'rearrange', 'count_tolerance')
    limit = -math.log(t) + tolerance
    stream = EigenvalueStream(w)
    count = 0
    while stream.next().log_value <= limit:
        count += 1
    return count


@typechecked
def level_counts(w: WeightSequence, max_log_value: float, tolerance: float = 1e-9) -> list:
    """
    Distinct log-values up to `max_log_value` with their multiplicities.

    Values closer than `tolerance` are merged into one level.

    Returns
    -------
    list of (float, int)
        (level log-value, multiplicity), increasing.
    """
    stream = EigenvalueStream(w)
    levels = []
    point = stream.next()
    while point.log_value <= max_log_value + tolerance:
        if levels and point.log_value - levels[-1][0] <= tolerance:
            levels[-1][1] += 1
        else:
            levels.append([point.log_value, 1])
        point = stream.next()
    return [(value, count) for value, count in levels]
