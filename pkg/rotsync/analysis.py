#!/usr/bin/env python3

"""
Statistical functionals over traces and particle ensembles.

 - :func:`d_functional`: the non-Diracness functional
   D(m) = ∬ dist(x, y) dm(x) dm(y) of an empirical measure
 - :func:`sync_fraction` and :func:`cesaro_distance` over two-point
   traces
 - :class:`Histogram` and :func:`histogram_distance` to compare
   empirical and predicted measures on T^k
"""

import dataclasses
import math
from typing import Sequence, Tuple

import numpy as np

from . import torus
from .errors import InvalidInputError

TV = "TV"
KS = "KS"

_PAIRWISE_CHUNK = 1 << 22


def positions_and_weights(ensemble):
    """
    Returns the (M, k) positions and the (M,) weights of an ensemble.
    Anything with `positions` and `weights` attributes is accepted, as
    well as a plain array of points with uniform weights.
    """
    if hasattr(ensemble, "positions"):
        positions = torus.as_points(ensemble.positions)
        weights = np.asarray(ensemble.weights, dtype=float)
    else:
        positions = torus.as_points(ensemble)
        if positions.ndim == 1:
            positions = positions[:, None]
        if len(positions) == 0:
            raise InvalidInputError("the ensemble is empty")
        weights = np.full(len(positions), 1.0 / len(positions))
    return positions, weights


def _circle_distance_sums(x, w):
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]

    W = np.concatenate([[0.0], np.cumsum(ws)])
    P = np.concatenate([[0.0], np.cumsum(ws * xs)])
    idx = np.arange(len(xs))
    a = np.searchsorted(xs, xs - 0.5, side="left")
    b = np.searchsorted(xs, xs + 0.5, side="right")

    sums = (
        xs * (W[idx] - W[a]) - (P[idx] - P[a]) +
        (P[b] - P[idx]) - xs * (W[b] - W[idx]) +
        (1.0 - xs) * W[a] + P[a] +
        (1.0 + xs) * (W[-1] - W[b]) - (P[-1] - P[b]))

    result = np.empty_like(sums)
    result[order] = sums
    return result


def _pairwise_distance_sums(positions, weights):
    result = np.empty(len(positions))
    step = max(1, _PAIRWISE_CHUNK // (len(positions) * positions.shape[1]))
    for start in range(0, len(positions), step):
        block = positions[start:start + step, None, :]
        distances = torus.torus_dist(block, positions[None, :, :])
        result[start:start + step] = np.atleast_2d(distances) @ weights
    return result


def distance_sums(ensemble) -> np.ndarray:
    """
    For each particle x_i the weighted sum Σ_j w_j·dist(x_i, x_j).

    On the circle the circle is cut at 0, the particles are sorted and
    the sums are assembled from prefix sums of weights and weighted
    positions in O(M log M); the pairs further apart than 1/2 along the
    cut circle contribute 1 − |x_i − x_j| instead of |x_i − x_j|. On
    T^k the pairs are summed directly.
    """
    positions, weights = positions_and_weights(ensemble)
    if positions.shape[1] == 1:
        return _circle_distance_sums(positions[:, 0], weights)
    return _pairwise_distance_sums(positions, weights)


def d_functional(ensemble) -> float:
    """
    D(m) = ∬ dist(x, y) dm(x) dm(y) for the weighted empirical measure
    of the ensemble.
    """
    _, weights = positions_and_weights(ensemble)
    return float(weights @ distance_sums(ensemble))


def d_functional_pairwise(ensemble) -> float:
    """
    D(m) by the quadratic sum over all pairs.
    """
    positions, weights = positions_and_weights(ensemble)
    return float(weights @ _pairwise_distance_sums(positions, weights))


def _horizon(trace, N):
    length = len(trace.distances) - 1
    if N is None:
        return length
    if not 1 <= N <= length:
        raise InvalidInputError(f"horizon {N} outside [1, {length}]")
    return int(N)


def _close(distances, delta, dimension):
    # every pair is within the diameter sqrt(k)/2
    if delta >= torus.max_dist(dimension):
        return np.ones(len(distances), dtype=bool)
    return distances < delta


def sync_fraction(trace, delta, N=None) -> float:
    """
    The fraction of the steps n in {1, ..., N} with
    dist(x_n, y_n) < `delta`.
    """
    if delta <= 0:
        raise InvalidInputError(f"delta must be positive: {delta}")
    N = _horizon(trace, N)
    return float(np.mean(_close(trace.distances[1:N + 1], delta,
                                len(trace.z0))))


def cesaro_distance(trace, N=None) -> float:
    """
    The mean of dist(x_n, y_n) over n in {1, ..., N}.
    """
    N = _horizon(trace, N)
    return float(np.mean(trace.distances[1:N + 1]))


def sync_fraction_table(trace, deltas: Sequence[float],
                        horizons: Sequence[int]):
    """
    Rows of sync fractions and Cesàro distances for every horizon N and
    every δ.
    """
    distances = trace.distances
    k = len(trace.z0)
    close = {delta: np.cumsum(_close(distances[1:], delta, k))
             for delta in deltas}
    running = np.cumsum(distances[1:])

    for N in horizons:
        N = _horizon(trace, N)
        for delta in deltas:
            yield {"N": N, "delta": delta,
                   "sync_fraction": float(close[delta][N - 1] / N),
                   "cesaro_distance": float(running[N - 1] / N)}


@dataclasses.dataclass(frozen=True, eq=False)
class Histogram:
    """
    A histogram over a uniform bin layout of T^k.

    With `centered` layouts the bin b of each axis covers
    [(b - 1/2)/B, (b + 1/2)/B) so that 0 lies in the middle of bin 0;
    otherwise it covers [b/B, (b + 1)/B). Points wrap so there is no
    underflow nor overflow.

    :Attributes:
     - `counts`: the raw (possibly fractional) counts, shape `bins`
     - `centered`: the layout kind
    """
    counts: np.ndarray
    centered: bool = False

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float)
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise InvalidInputError("histogram counts must be finite, >= 0")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def bins(self) -> Tuple[int, ...]:
        return self.counts.shape

    @property
    def dimension(self):
        return self.counts.ndim

    @property
    def layout(self):
        return self.bins, self.centered

    @property
    def total(self):
        return float(self.counts.sum())

    @property
    def masses(self):
        total = self.total
        if total == 0:
            return np.zeros(self.bins)
        return self.counts / total

    @staticmethod
    def bin_index(points, bins, centered=False):
        """
        The flat bin index of each point.
        """
        points = torus.wrap(points)
        bins = np.asarray(bins)
        offset = 0.5 if centered else 0.0
        index = np.floor(points * bins + offset).astype(np.int64) % bins
        return np.ravel_multi_index(
            tuple(np.moveaxis(index, -1, 0)), tuple(bins))

    @classmethod
    def from_points(cls, points, bins, centered=False, weights=None):
        """
        Counts the points of an (n, k) stack into `bins` bins per axis
        (an int or a sequence of k ints).
        """
        points = torus.as_points(points)
        if points.ndim == 1:
            points = points[:, None]

        k = points.shape[-1]
        bins = (bins,) * k if np.isscalar(bins) else tuple(bins)
        if len(bins) != k:
            raise InvalidInputError(f"{len(bins)} bin counts for k={k}")

        flat = cls.bin_index(points.reshape(-1, k), bins, centered)
        counts = np.bincount(flat, weights=weights,
                             minlength=int(np.prod(bins)))
        return cls(counts.reshape(bins), centered)

    @classmethod
    def from_masses(cls, masses, centered=False):
        return cls(np.asarray(masses, dtype=float), centered)

    def bin_centers(self):
        """
        The (n_bins, k) centers of the bins in flat order.
        """
        offset = 0.0 if self.centered else 0.5
        axes = [(np.arange(b) + offset) / b for b in self.bins]
        return np.stack([g.reshape(-1) for g in np.meshgrid(
            *axes, indexing="ij")], axis=-1)

    def zero_bin(self):
        """
        The flat index of the bin containing 0.
        """
        return 0

    def check_layout(self, other):
        if self.layout != other.layout:
            raise InvalidInputError(
                f"histogram layouts differ: {self.layout} != {other.layout}")

    def merge(self, other):
        """
        The histogram of the union of both samples.
        """
        self.check_layout(other)
        return Histogram(self.counts + other.counts, self.centered)

    def without_zero_bin(self):
        counts = self.counts.copy().reshape(-1)
        counts[self.zero_bin()] = 0.0
        return Histogram(counts.reshape(self.bins), self.centered)

    def rows(self):
        for center, mass in zip(self.bin_centers(),
                                self.masses.reshape(-1)):
            row = {f"center_{i + 1}": float(c) for i, c in enumerate(center)}
            row["mass"] = float(mass)
            yield row


def histogram_distance(h1: Histogram, h2: Histogram, kind=TV) -> float:
    """
    The distance between the normalized histograms: the total variation
    ½·Σ|p − q| or, in dimension 1, the Kolmogorov-Smirnov distance of
    the cumulative sums along the circle cut at 0.
    """
    h1.check_layout(h2)
    p, q = h1.masses.reshape(-1), h2.masses.reshape(-1)

    if kind == TV:
        return float(0.5 * np.sum(np.abs(p - q)))
    elif kind == KS:
        if h1.dimension != 1:
            raise InvalidInputError("the KS distance is only defined for k=1")
        if h1.centered:
            # cut at 0 is in the middle of bin 0; start from the bin
            # right after it
            p, q = np.roll(p, -1), np.roll(q, -1)
        return float(np.max(np.abs(np.cumsum(p) - np.cumsum(q))))

    raise InvalidInputError(f"unknown histogram distance {kind!r}")


def median_over_seeds(values) -> float:
    """
    The median of per-seed values, NaN when there are none.
    """
    values = [v for v in values if v is not None]
    if not values:
        return math.nan
    return float(np.median(values))
