#!/usr/bin/env python3

"""
Representations of the set A: canonical unions of circle arcs
(:class:`IntervalUnion`), unions of axis-aligned boxes on T^k
(:class:`BoxUnion`) and the family of fat Cantor set approximants
(:class:`CantorSpec`).

Every arc and box is half-open, [a, b). An arc that wraps through 0 is
stored split in two pieces, [a, 1) and [0, b); apart from that split
the arcs of a canonical union are sorted, disjoint and maximally
merged. Boxes never wrap either: a box crossing 0 along an axis is
stored as two boxes.

Sets are plain immutable values, safe to share between threads:

  A = canonicalize([(0.0, 0.3)])
  B = translate_set(A, 0.9)      # [0, 0.2) and [0.9, 1)
  symm_diff_measure(A, B)        # 0.2
"""

import dataclasses
import itertools
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import torus
from .errors import (CapacityError, InvalidInputError,
                     UnrepresentableDepthError)

# arcs and box sides shorter than this are dropped on canonicalization
DEGENERATE_LENGTH = 1e-15

# upper bound on the number of elements of the temporary arrays built
# by the pairwise overlap kernel
_CHUNK_ELEMENTS = 1 << 22


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True, eq=False)
class IntervalUnion:
    """
    A finite union of half-open circle arcs in canonical form.

    Do not build instances directly; use :func:`canonicalize` or
    :meth:`from_starts` which establish the invariants.

    Data Attributes:
     - `lefts`: sorted left endpoints, in [0, 1)
     - `rights`: right endpoints, in (0, 1]
     - `origin`: the set descriptor this union was realized from, if
       any (see :func:`to_descriptor`)
    """
    lefts: np.ndarray
    rights: np.ndarray
    origin: Optional[dict] = dataclasses.field(default=None, compare=False)

    dimension = 1

    def __post_init__(self):
        object.__setattr__(self, "lefts", _frozen_array(self.lefts))
        object.__setattr__(self, "rights", _frozen_array(self.rights))

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def full(cls):
        return cls(np.zeros(1), np.ones(1))

    @classmethod
    def from_starts(cls, starts, lengths, origin=None):
        """
        Builds the canonical union of the arcs [s, s + length) taken
        modulo 1. A length of 1 or more covers the whole circle.

        :Parameters:
         - `starts`: the left endpoints, any real numbers
         - `lengths`: the non-negative arc lengths
         - `origin` (optional): a set descriptor to remember
        """
        starts = torus.wrap(np.asarray(starts, dtype=float).reshape(-1))
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        if starts.shape != lengths.shape:
            raise InvalidInputError("starts and lengths differ in size")
        if np.any(lengths < 0) or not np.all(np.isfinite(lengths)):
            raise InvalidInputError("arc lengths must be finite and >= 0")

        if np.any(lengths >= 1.0):
            return dataclasses.replace(cls.full(), origin=origin)

        keep = lengths >= DEGENERATE_LENGTH
        starts, lengths = starts[keep], lengths[keep]
        ends = starts + lengths
        wrapping = ends > 1.0

        lefts = np.concatenate([starts, np.zeros(np.count_nonzero(wrapping))])
        rights = np.concatenate([np.minimum(ends, 1.0), ends[wrapping] - 1.0])

        keep = rights - lefts >= DEGENERATE_LENGTH
        lefts, rights = _merge_sorted(lefts[keep], rights[keep])
        return cls(lefts, rights, origin=origin)

    @property
    def arcs(self):
        """
        The stored (left, right) pairs as a list of float tuples.
        """
        return [(float(a), float(b)) for a, b in zip(self.lefts, self.rights)]

    @property
    def lengths(self):
        return self.rights - self.lefts

    @property
    def is_full(self):
        return len(self.lefts) == 1 and self.lefts[0] == 0.0 and \
            self.rights[0] == 1.0

    @property
    def wraps(self):
        """
        True if one circle component is stored split at 0.
        """
        return len(self.lefts) > 1 and self.lefts[0] == 0.0 and \
            self.rights[-1] == 1.0

    @property
    def component_count(self):
        """
        Number of connected components on the circle.
        """
        return len(self.lefts) - (1 if self.wraps else 0)

    def component_lengths(self):
        lengths = self.lengths
        if self.wraps:
            lengths = np.concatenate(
                [[lengths[0] + lengths[-1]], lengths[1:-1]])
        return lengths

    def gap_lengths(self):
        """
        Lengths of the components of the complement.
        """
        if len(self.lefts) == 0:
            return np.ones(1)
        if self.is_full:
            return np.empty(0)

        gaps = self.lefts[1:] - self.rights[:-1]
        if not self.wraps:
            gaps = np.concatenate(
                [gaps, [1.0 - self.rights[-1] + self.lefts[0]]])
        return gaps

    @property
    def largest_component(self):
        lengths = self.component_lengths()
        return float(lengths.max()) if len(lengths) else 0.0

    @property
    def largest_gap(self):
        gaps = self.gap_lengths()
        return float(gaps.max()) if len(gaps) else 0.0

    def __len__(self):
        return len(self.lefts)

    def __eq__(self, other):
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return np.array_equal(self.lefts, other.lefts) and \
            np.array_equal(self.rights, other.rights)

    def __repr__(self):
        arcs = ", ".join(f"[{a:.6g}, {b:.6g})" for a, b in self.arcs[:8])
        more = f", ... ({len(self)} arcs)" if len(self) > 8 else ""
        return f"IntervalUnion({arcs}{more})"


def _merge_sorted(lefts, rights):
    """
    Sorts arcs that do not wrap and merges the overlapping or touching
    ones.
    """
    if len(lefts) == 0:
        return lefts, rights

    order = np.argsort(lefts, kind="stable")
    lefts, rights = lefts[order], rights[order]

    reach = np.maximum.accumulate(rights)
    new_group = np.empty(len(lefts), dtype=bool)
    new_group[0] = True
    new_group[1:] = lefts[1:] > reach[:-1]

    starts = np.flatnonzero(new_group)
    return lefts[starts], np.maximum.reduceat(rights, starts)


@dataclasses.dataclass(frozen=True, eq=False)
class BoxUnion:
    """
    A finite union of pairwise disjoint axis-aligned boxes on T^k. Each
    box is a product of k half-open arcs that do not wrap.

    Use :func:`product_set`, :meth:`from_boxes` or :func:`translate_set`
    to build instances.

    Data Attributes:
     - `lows`: (n, k) array of lower corners in [0, 1)
     - `highs`: (n, k) array of upper corners in (0, 1]
     - `origin`: the set descriptor this union was built from, if any
    """
    lows: np.ndarray
    highs: np.ndarray
    origin: Optional[dict] = dataclasses.field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lows", _frozen_array(self.lows))
        object.__setattr__(self, "highs", _frozen_array(self.highs))
        if self.lows.ndim != 2 or self.lows.shape != self.highs.shape:
            raise InvalidInputError("boxes must be given as (n, k) arrays")

    @property
    def dimension(self):
        return self.lows.shape[1]

    @classmethod
    def from_boxes(cls, boxes, origin=None):
        """
        Builds a canonical union from raw boxes. Each raw box is a
        sequence of k (low, high) pairs with endpoints in [0, 1]; a pair
        with high < low wraps through 0. Overlapping boxes are allowed
        and are decomposed into disjoint ones.

        :Parameters:
         - `boxes`: a sequence of boxes
         - `origin` (optional): a set descriptor to remember
        """
        raw = np.asarray(boxes, dtype=float)
        if raw.ndim != 3 or raw.shape[2] != 2 or raw.shape[0] == 0:
            raise InvalidInputError(
                "boxes must be a non-empty list of [[low, high], ...] lists")

        lows, highs = raw[:, :, 0], raw[:, :, 1]
        lengths = np.where(highs >= lows, highs - lows, highs - lows + 1.0)
        lows, highs = _split_boxes(lows, lengths)

        if _has_overlaps(lows, highs):
            lows, highs = _disjoint_cells(lows, highs)

        return cls(lows, highs, origin=origin)

    def __len__(self):
        return len(self.lows)

    def __eq__(self, other):
        if not isinstance(other, BoxUnion):
            return NotImplemented
        return np.array_equal(self.lows, other.lows) and \
            np.array_equal(self.highs, other.highs)

    def __repr__(self):
        return f"BoxUnion({len(self)} boxes, k={self.dimension})"


def _split_boxes(starts, lengths):
    """
    Turns boxes given by start corners and side lengths (modulo 1) into
    non-wrapping boxes. Sides of length >= 1 cover the whole axis.
    """
    starts = torus.wrap(starts)
    lengths = np.minimum(np.asarray(lengths, dtype=float), 1.0)
    starts = np.where(lengths >= 1.0, 0.0, starts)

    keep = np.all(lengths >= DEGENERATE_LENGTH, axis=1)
    lows, highs = starts[keep], starts[keep] + lengths[keep]

    for axis in range(lows.shape[1]):
        wrapping = highs[:, axis] > 1.0
        if not np.any(wrapping):
            continue

        head_lows, head_highs = lows[wrapping].copy(), highs[wrapping].copy()
        head_lows[:, axis] = 0.0
        head_highs[:, axis] -= 1.0
        highs[wrapping, axis] = 1.0

        lows = np.concatenate([lows, head_lows])
        highs = np.concatenate([highs, head_highs])

    keep = np.all(highs - lows >= DEGENERATE_LENGTH, axis=1)
    return lows[keep], highs[keep]


def _has_overlaps(lows, highs):
    volumes = _pairwise_overlap(lows, highs, lows, highs)
    np.fill_diagonal(volumes, 0.0)
    return bool(np.any(volumes > 0.0))


def _pairwise_overlap(lows1, highs1, lows2, highs2):
    """
    Volume of the intersection of every box of the first list with
    every box of the second list, as an (n1, n2) array.
    """
    low = np.maximum(lows1[:, None, :], lows2[None, :, :])
    high = np.minimum(highs1[:, None, :], highs2[None, :, :])
    return np.prod(np.clip(high - low, 0.0, None), axis=-1)


def _cells(*unions):
    """
    The coordinate-cut decomposition of T^k induced by the box faces of
    all the given unions. Returns the cell midpoints (C, k) and the cell
    volumes (C,).
    """
    dimension = unions[0].lows.shape[1]
    midpoints, widths = [], []
    for axis in range(dimension):
        cuts = np.unique(np.concatenate(
            [[0.0, 1.0]] +
            [np.concatenate([u.lows[:, axis], u.highs[:, axis]])
             for u in unions]))
        midpoints.append((cuts[:-1] + cuts[1:]) / 2)
        widths.append(np.diff(cuts))

    mids = np.stack(
        [g.reshape(-1) for g in np.meshgrid(*midpoints, indexing="ij")],
        axis=-1)
    volumes = np.prod(np.stack(
        [g.reshape(-1) for g in np.meshgrid(*widths, indexing="ij")],
        axis=-1), axis=-1)
    return mids, volumes


def _disjoint_cells(lows, highs):
    raw = BoxUnion(lows, highs)
    mids, _ = _cells(raw)
    inside = _box_contains(raw, mids)

    cell_lows, cell_highs = [], []
    for axis in range(lows.shape[1]):
        cuts = np.unique(np.concatenate(
            [[0.0, 1.0], lows[:, axis], highs[:, axis]]))
        cell_lows.append(cuts[:-1])
        cell_highs.append(cuts[1:])

    grid_lows = np.stack([g.reshape(-1) for g in np.meshgrid(
        *cell_lows, indexing="ij")], axis=-1)
    grid_highs = np.stack([g.reshape(-1) for g in np.meshgrid(
        *cell_highs, indexing="ij")], axis=-1)
    return grid_lows[inside], grid_highs[inside]


def _box_contains(union, points):
    points = np.asarray(points, dtype=float)
    flat = points.reshape(-1, union.dimension)
    result = np.empty(len(flat), dtype=bool)

    step = max(1, _CHUNK_ELEMENTS // max(1, len(union) * union.dimension))
    for start in range(0, len(flat), step):
        chunk = flat[start:start + step, None, :]
        result[start:start + step] = np.any(
            np.all((chunk >= union.lows) & (chunk < union.highs), axis=-1),
            axis=-1)

    return result.reshape(points.shape[:-1])


Set = Union[IntervalUnion, BoxUnion]


def canonicalize(raw_arcs) -> IntervalUnion:
    """
    Returns the canonical :class:`IntervalUnion` of `raw_arcs`, a
    sequence of (a, b) pairs with endpoints in [0, 1]. A pair with
    b < a is an arc wrapping through 0; a pair with a == b is empty.
    """
    raw = np.asarray(list(raw_arcs), dtype=float).reshape(-1, 2)
    lefts, rights = raw[:, 0], raw[:, 1]
    if np.any((raw < 0.0) | (raw > 1.0)) or not np.all(np.isfinite(raw)):
        raise InvalidInputError(f"arc endpoints must lie in [0, 1]: {raw}")

    lengths = np.where(rights >= lefts, rights - lefts, rights - lefts + 1.0)
    return IntervalUnion.from_starts(lefts, lengths)


def measure(S: Set) -> float:
    """
    The exact Lebesgue measure of `S`.
    """
    if isinstance(S, IntervalUnion):
        return float(np.sum(S.rights - S.lefts))
    return float(np.sum(np.prod(S.highs - S.lows, axis=1)))


def _dimension(S):
    return S.dimension


def _check_compatible(S1, S2):
    if _dimension(S1) != _dimension(S2):
        raise InvalidInputError(
            f"dimension mismatch: {_dimension(S1)} != {_dimension(S2)}")


def contains(S: Set, p):
    """
    Membership of a point (or of a stack of points) in `S`. Returns a
    bool for a single point and a bool array for a stack.
    """
    points = torus.as_points(p, dimension=_dimension(S))
    if isinstance(S, IntervalUnion):
        x = points[..., 0]
        idx = np.searchsorted(S.lefts, x, side="right") - 1
        safe = np.clip(idx, 0, max(len(S.lefts) - 1, 0))
        result = (idx >= 0) & (x < S.rights[safe]) if len(S.lefts) else \
            np.zeros(x.shape, dtype=bool)
    else:
        result = _box_contains(S, points)

    return bool(result) if np.ndim(result) == 0 else result


def membership_oracle(S: Set) -> Callable:
    """
    Returns contains(S, .) as a callable over stacks of points.
    """
    return lambda points: contains(S, points)


def translate_set(S: Set, u) -> Set:
    """
    The translate T_u(S), re-canonicalized.
    """
    u = torus.as_points(u, dimension=_dimension(S))
    if isinstance(S, IntervalUnion):
        return IntervalUnion.from_starts(S.lefts + u[0], S.lengths)

    lows, highs = _split_boxes(S.lows + u, S.highs - S.lows)
    return BoxUnion(lows, highs)


def _sweep(S1, S2, keep):
    """
    Sweeps the merged endpoint lists of two interval unions and returns
    the lengths and bounds of the elementary segments together with the
    coverage flags.
    """
    pos = np.concatenate([S1.lefts, S1.rights, S2.lefts, S2.rights])
    n1, n2 = len(S1.lefts), len(S2.lefts)
    d1 = np.concatenate([np.ones(n1), -np.ones(n1), np.zeros(2 * n2)])
    d2 = np.concatenate([np.zeros(2 * n1), np.ones(n2), -np.ones(n2)])

    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    in1 = np.cumsum(d1[order]) > 0
    in2 = np.cumsum(d2[order]) > 0

    ends = np.append(pos[1:], 1.0)
    selected = keep(in1, in2) & (ends > pos)
    return pos[selected], ends[selected]


def symm_diff_measure(S1: Set, S2: Set) -> float:
    """
    The exact measure Leb(S1 Δ S2).

    Interval unions are handled by a single sweep over the merged
    endpoint lists; box unions by the coordinate-cut decomposition of
    T^k into cells, each of which lies entirely inside or outside of
    either set.
    """
    _check_compatible(S1, S2)
    if isinstance(S1, IntervalUnion) and isinstance(S2, IntervalUnion):
        starts, ends = _sweep(S1, S2, np.logical_xor)
        return float(np.sum(ends - starts))

    S1, S2 = as_box_union(S1), as_box_union(S2)
    mids, volumes = _cells(S1, S2)
    differ = _box_contains(S1, mids) != _box_contains(S2, mids)
    return float(np.sum(volumes[differ]))


def _boolean(S1, S2, keep):
    _check_compatible(S1, S2)
    starts, ends = _sweep(S1, S2, keep)
    lefts, rights = _merge_sorted(starts, ends)
    return IntervalUnion(lefts, rights)


def intersect(S1: IntervalUnion, S2: IntervalUnion) -> IntervalUnion:
    return _boolean(S1, S2, np.logical_and)


def union(S1: IntervalUnion, S2: IntervalUnion) -> IntervalUnion:
    return _boolean(S1, S2, np.logical_or)


def difference(S1: IntervalUnion, S2: IntervalUnion) -> IntervalUnion:
    return _boolean(S1, S2, lambda a, b: a & ~b)


def complement(S: IntervalUnion) -> IntervalUnion:
    return difference(IntervalUnion.full(), S)


def as_box_union(S: Set) -> BoxUnion:
    """
    Views an interval union as a one-dimensional box union.
    """
    if isinstance(S, BoxUnion):
        return S
    return BoxUnion(S.lefts[:, None], S.rights[:, None], origin=S.origin)


def intersection_measure(S1: Set, S2: Set) -> float:
    """
    The exact measure Leb(S1 ∩ S2), summing the overlaps of all pairs
    of boxes (or arcs).
    """
    _check_compatible(S1, S2)
    B1, B2 = as_box_union(S1), as_box_union(S2)
    return float(np.sum(_pairwise_overlap(B1.lows, B1.highs,
                                          B2.lows, B2.highs)))


def difference_measure(S1: Set, S2: Set) -> float:
    """
    The exact measure Leb(S1 ∖ S2).
    """
    return max(0.0, measure(S1) - intersection_measure(S1, S2))


def is_subset(S1: Set, S2: Set, tolerance=1e-12) -> bool:
    """
    Whether S1 ⊆ S2 up to a set of measure at most `tolerance`.
    """
    return difference_measure(S1, S2) <= tolerance


def overlap_with_translates(S: Set, eps) -> np.ndarray:
    """
    Leb(S ∩ T_ε(S)) for a stack of translation vectors at once.

    Translating a disjoint family keeps it disjoint, and the
    intersection of two boxes of T^k is the product of the per-axis
    circular overlaps, so the result is the sum over all pairs of boxes
    of those products.

    :Parameters:
     - `S`: the set
     - `eps`: an (E, k) stack of translation vectors (or anything
       :func:`rotsync.torus.wrap` accepts)
    """
    B = as_box_union(S)
    eps = torus.wrap(torus.as_points(eps, dimension=B.dimension))
    flat = eps.reshape(-1, B.dimension)

    n = len(B)
    result = np.zeros(len(flat))
    if n == 0:
        return result.reshape(eps.shape[:-1])

    step = max(1, _CHUNK_ELEMENTS // (n * n * B.dimension))
    a, b = B.lows[:, None, :], B.highs[:, None, :]
    for start in range(0, len(flat), step):
        e = flat[start:start + step, None, None, :]
        c, d = B.lows[None, :, :] + e, B.highs[None, :, :] + e
        per_axis = (
            np.clip(np.minimum(b, d) - np.maximum(a, c), 0.0, None) +
            np.clip(np.minimum(b, d - 1.0) - np.maximum(a, c - 1.0), 0.0,
                    None))
        result[start:start + step] = np.sum(
            np.prod(per_axis, axis=-1), axis=(1, 2))

    return result.reshape(eps.shape[:-1])


@dataclasses.dataclass(frozen=True)
class CantorSpec:
    """
    The n-th approximant M_n of a fat Cantor set: start from M_0 = [0, 1)
    and at step j remove from the middle of each of the 2^(j-1) arcs of
    M_(j-1) an interval of length base^(-j).

    With the default base 8 the limit set has measure 5/6 and
    Leb(M_n ∖ A) = 4^(-n)/6. Smaller bases (still > 2) give smaller
    near-zero exponents of the displacement function.

    Data Attributes:
     - `depth`: the number n of removal steps
     - `base`: the removal length base (> 2)
    """
    depth: int
    base: float = 8

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 0:
            raise InvalidInputError(f"invalid Cantor depth {self.depth!r}")
        if not self.base > 2:
            raise InvalidInputError(f"Cantor base must exceed 2: {self.base}")

    def removal_length(self, step):
        return float(self.base) ** (-step)

    @property
    def limit_measure(self):
        """
        Measure of the infinite-depth set, 1 - 1/(base - 2).
        """
        return 1.0 - 1.0 / (self.base - 2)

    @property
    def remainder(self):
        """
        Leb(M_n ∖ A) = (2/base)^n / (base - 2).
        """
        return (2.0 / self.base) ** self.depth / (self.base - 2)

    @property
    def approximant_measure(self):
        return self.limit_measure + self.remainder

    @property
    def predicted_alpha(self):
        """
        The near-zero exponent of the limit set's displacement function,
        1 - log 2 / log base (2/3 for base 8).
        """
        return 1.0 - math.log(2.0) / math.log(self.base)

    def descriptor(self):
        return {"kind": "cantor", "depth": int(self.depth),
                "base": self.base}


def _check_cantor_depth(spec, depth):
    if depth * math.log2(spec.base) > 1022:
        raise UnrepresentableDepthError(
            f"removal length {spec.base}^-{depth} underflows")


def realize_cantor(spec: CantorSpec, max_arcs=1 << 24) -> IntervalUnion:
    """
    Realizes the approximant M_n as an :class:`IntervalUnion` of
    exactly 2^n arcs.

    :Parameters:
     - `spec`: the :class:`CantorSpec`
     - `max_arcs` (optional): cap on 2^n
    """
    _check_cantor_depth(spec, spec.depth)
    if 2 ** spec.depth > max_arcs:
        raise CapacityError(
            f"depth {spec.depth} needs {2 ** spec.depth} arcs, more than "
            f"the cap {max_arcs}")

    lefts, rights = np.zeros(1), np.ones(1)
    for step in range(1, spec.depth + 1):
        half = spec.removal_length(step) / 2
        mids = (lefts + rights) / 2
        if np.any(mids - half <= lefts):
            raise UnrepresentableDepthError(
                f"the step {step} removal does not fit for base {spec.base}")

        lefts, rights = (
            np.stack([lefts, mids + half], axis=1).reshape(-1),
            np.stack([mids - half, rights], axis=1).reshape(-1))

    return IntervalUnion(lefts, rights, origin=spec.descriptor())


def cantor_contains(x, max_depth: int, base=8):
    """
    Whether `x` survives the first `max_depth` removal steps, by
    descending the binary tree of arcs level by level. Accepts a scalar
    or an array of points in [0, 1).
    """
    spec = CantorSpec(max_depth, base)
    _check_cantor_depth(spec, max_depth)

    x = np.asarray(x, dtype=float)
    lefts, rights = np.zeros(x.shape), np.ones(x.shape)
    alive = np.ones(x.shape, dtype=bool)
    for step in range(1, max_depth + 1):
        half = spec.removal_length(step) / 2
        mids = (lefts + rights) / 2
        alive &= ~((x >= mids - half) & (x < mids + half))

        right_side = x >= mids + half
        lefts = np.where(right_side, mids + half, lefts)
        rights = np.where(right_side, rights, mids - half)

    return bool(alive) if alive.ndim == 0 else alive


def product_set(factors: Sequence[IntervalUnion]) -> BoxUnion:
    """
    The Cartesian product of k interval unions as a :class:`BoxUnion`.
    """
    if not factors:
        raise InvalidInputError("product_set needs at least one factor")

    boxes = list(itertools.product(*[f.arcs for f in factors]))
    k = len(factors)
    origin = {"kind": "product", "factors": [to_descriptor(f)
                                             for f in factors]}
    if not boxes:
        return BoxUnion(np.empty((0, k)), np.empty((0, k)), origin=origin)

    arr = np.asarray(boxes, dtype=float)
    return BoxUnion(arr[:, :, 0], arr[:, :, 1], origin=origin)


def random_arcs(rng: np.random.Generator, count: int) -> IntervalUnion:
    """
    A union of `count` disjoint arcs with random endpoints, none of
    which wraps through 0.
    """
    points = np.sort(rng.random(2 * count))
    return canonicalize(points.reshape(-1, 2))


def from_descriptor(descriptor: dict) -> Set:
    """
    Builds a set from a descriptor dictionary. The supported kinds are:

     - {"kind": "intervals", "arcs": [[a, b], ...]}
     - {"kind": "boxes", "boxes": [[[low, high], ...per axis], ...]}
     - {"kind": "cantor", "depth": n, "base": 8}
     - {"kind": "product", "factors": [descriptor, ...]}
    """
    try:
        kind = descriptor["kind"]
        if kind == "intervals":
            result = canonicalize(descriptor["arcs"])
            return dataclasses.replace(result, origin=dict(descriptor))
        elif kind == "boxes":
            return BoxUnion.from_boxes(descriptor["boxes"],
                                       origin=dict(descriptor))
        elif kind == "cantor":
            return realize_cantor(CantorSpec(int(descriptor["depth"]),
                                             descriptor.get("base", 8)))
        elif kind == "product":
            factors = [from_descriptor(f) for f in descriptor["factors"]]
            if not all(isinstance(f, IntervalUnion) for f in factors):
                raise InvalidInputError("product factors must be 1D sets")
            return product_set(factors)
    except (KeyError, TypeError) as exp:
        raise InvalidInputError(
            f"malformed set descriptor {descriptor!r}: {exp}") from exp

    raise InvalidInputError(f"unknown set descriptor kind {kind!r}")


def to_descriptor(S: Set) -> dict:
    """
    The descriptor of `S`: the one it was built from if known, an
    explicit arc or box list otherwise.
    """
    if S.origin is not None:
        return dict(S.origin)
    if isinstance(S, IntervalUnion):
        return {"kind": "intervals", "arcs": [list(a) for a in S.arcs]}
    return {"kind": "boxes",
            "boxes": np.stack([S.lows, S.highs], axis=-1).tolist()}
