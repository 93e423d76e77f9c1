"""Temporal hierarchies: aggregation levels, summing matrices and stacked periods.

Rows of every hierarchy vector and matrix are ordered by descending
aggregation factor, and within a level by ascending position in the period.
The bottom level (factor 1) always comes last.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyAggregate, IndexOutOfRange, InvalidHierarchy


@dataclass(frozen=True)
class TemporalHierarchy:
    """Set of aggregation factors ``ks`` such as ``(12, 4, 1)``.

    Every factor must divide the top factor ``m = ks[0]`` and the list must be
    strictly descending and end in 1.
    """

    ks: tuple

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if not ks:
            raise InvalidHierarchy("empty list of aggregation factors")
        if ks[-1] != 1:
            raise InvalidHierarchy(f"aggregation factors must end in 1, got {ks}")
        if any(a <= b for a, b in zip(ks, ks[1:])):
            raise InvalidHierarchy(f"aggregation factors must be strictly descending, got {ks}")
        if any(k < 1 or ks[0] % k for k in ks):
            raise InvalidHierarchy(f"every factor must divide the top factor {ks[0]}, got {ks}")
        object.__setattr__(self, "ks", ks)

    @property
    def m(self):
        return self.ks[0]

    @property
    def M(self):
        """Number of values per top-level period, one entry per level."""
        return tuple(self.m // k for k in self.ks)

    @property
    def n(self):
        return sum(self.M)

    @property
    def n_b(self):
        return self.m

    def level_slices(self):
        """Map each factor to its row slice in a stacked hierarchy vector."""
        out = {}
        start = 0
        for k, mk in zip(self.ks, self.M):
            out[k] = slice(start, start + mk)
            start += mk
        return out

    def row_labels(self):
        """Labels ``"<level>-<z>"`` with level 1 the top, as used in heatmaps."""
        return [
            f"{lvl}-{z}"
            for lvl, mk in enumerate(self.M, start=1)
            for z in range(1, mk + 1)
        ]


def build_summing_matrix(hier):
    """Return the ``n x m`` summing matrix of a temporal hierarchy."""
    blocks = []
    for k in hier.ks:
        mk = hier.m // k
        blocks.append(np.kron(np.eye(mk), np.ones((1, k))))
    return np.vstack(blocks)


def aggregate(bottom, k, t_star=1):
    """Non-overlapping flow aggregation of ``bottom`` into sums of ``k`` values.

    ``t_star`` is the 1-based index of the first observation used. Trailing
    observations that do not fill a complete window are dropped.
    """
    x = np.asarray(bottom, dtype=float)
    k = int(k)
    if k < 1:
        raise ValueError(f"aggregation factor must be >= 1, got {k}")
    if t_star < 1:
        raise ValueError(f"t_star is 1-based, got {t_star}")
    usable = x[t_star - 1:]
    count = usable.size // k
    if count == 0:
        raise EmptyAggregate(
            f"need at least {k} observations from t_star={t_star}, have {usable.size}"
        )
    return usable[: count * k].reshape(count, k).sum(axis=1)


@dataclass
class HierarchySeries:
    """Aligned series of every level, all covering ``I`` complete top periods."""

    hierarchy: TemporalHierarchy
    levels: dict = field(repr=False)

    @property
    def I(self):
        return self.levels[1].size // self.hierarchy.m

    @property
    def bottom(self):
        return self.levels[1]

    def truncate(self, periods):
        """Keep only the first ``periods`` top-level periods."""
        return HierarchySeries(
            self.hierarchy,
            {k: v[: periods * (self.hierarchy.m // k)] for k, v in self.levels.items()},
        )

    def matrix(self):
        """All stacked period vectors as an ``I x n`` array."""
        cols = [
            self.levels[k].reshape(self.I, mk)
            for k, mk in zip(self.hierarchy.ks, self.hierarchy.M)
        ]
        return np.hstack(cols)


def build_hierarchy_series(bottom, hier):
    """Aggregate ``bottom`` to every level, dropping a trailing partial period."""
    x = np.asarray(bottom, dtype=float)
    periods = x.size // hier.m
    if periods == 0:
        raise EmptyAggregate(
            f"series of length {x.size} is shorter than one top-level period ({hier.m})"
        )
    x = x[: periods * hier.m]
    return HierarchySeries(hier, {k: aggregate(x, k, 1) for k in hier.ks})


def stack_period(hs, i):
    """Stacked hierarchy vector of top-level period ``i`` (1-based)."""
    if not 1 <= i <= hs.I:
        raise IndexOutOfRange(f"period index {i} outside 1..{hs.I}")
    parts = [
        hs.levels[k][(i - 1) * mk: i * mk]
        for k, mk in zip(hs.hierarchy.ks, hs.hierarchy.M)
    ]
    return np.concatenate(parts)


def check_coherence(v, S, tol=1e-9):
    """True when ``v`` equals ``S`` applied to its own bottom block, within ``tol``."""
    v = np.asarray(v, dtype=float)
    S = np.asarray(S, dtype=float)
    if v.ndim != 1 or v.size != S.shape[0]:
        raise DimensionMismatch(f"vector of size {v.size} does not match S with {S.shape[0]} rows")
    bottom = v[S.shape[0] - S.shape[1]:]
    return bool(np.max(np.abs(v - S @ bottom)) <= tol)
