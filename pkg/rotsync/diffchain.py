#!/usr/bin/env python3

"""
The difference chain of two coupled trajectories.

Its state is z_n = z0 + m_n·v (mod 1); at each step it jumps by +v or
−v with probability φ_A(z_n)/2 each and holds otherwise. The same law
is realized by a simple ±v random walk slowed down by geometric holding
times of mean 1/φ_A at each site (:func:`slowed_orbit`), which
:func:`law_equivalence_test` checks with a chi-square test.

When 1/φ_A is integrable the occupation measure of the chain converges
to (1/Z)·dz/φ_A(z) (:func:`predicted_density`).
"""

import dataclasses
import logging
import math
from typing import Callable, Union

import numpy as np
from scipy import stats

from . import analysis, displacement, sets, torus
from .errors import (InvalidInputError, InvalidProbabilityError,
                     UnderpoweredTestError)
from .rds import NoiseStream

_logger = logging.getLogger(__name__)

MIN_TRIALS = 10 ** 4
MIN_EXPECTED = 5


class LatticePhi:
    """
    φ over the lattice z0 + m·v, tabulated lazily: the exact values of
    a contiguous range of indices m are computed at once and the range
    grows on demand.

    :Parameters:
     - `phi`: an interval union, a box union, a set descriptor or a
       vectorized callable φ(ε) over (n, k) translation vectors
     - `z0`: the lattice origin
     - `v`: the lattice step
    """

    def __init__(self, phi: Union[sets.IntervalUnion, sets.BoxUnion,
                                  dict, Callable], z0, v):
        self.v = torus.wrap(torus.as_points(v))
        self.z0 = torus.wrap(torus.as_points(z0, dimension=len(self.v)))
        if isinstance(phi, (sets.IntervalUnion, sets.BoxUnion, dict)):
            A = phi
            self._function = lambda eps: displacement.phi_many(A, eps)
        else:
            self._function = phi

        self._low = 0
        self._table = np.empty(0)
        self._list = []

    @property
    def dimension(self):
        return len(self.v)

    def positions(self, m):
        m = np.asarray(m)
        return torus.wrap(self.z0 + m[..., None] * self.v)

    def _grow(self, low, high):
        if len(self._table) == 0:
            new_low, new_high = low, high
        else:
            current_high = self._low + len(self._table) - 1
            span = max(len(self._table), 64)
            new_low = min(low, self._low - span) if low < self._low \
                else self._low
            new_high = max(high, current_high + span) \
                if high > current_high else current_high

        indices = np.arange(new_low, new_high + 1)
        values = np.asarray(self._function(self.positions(indices)),
                            dtype=float).reshape(-1)
        if np.any((values < 0) | (values > 1)) or \
                not np.all(np.isfinite(values)):
            raise InvalidProbabilityError(
                f"φ provider returned values outside [0, 1]: "
                f"{values[(values < 0) | (values > 1)][:5]}")

        self._low, self._table = new_low, values
        self._list = values.tolist()

    def values(self, m) -> np.ndarray:
        """
        φ(z0 + m·v) for an array of indices.
        """
        m = np.asarray(m, dtype=np.int64)
        if m.size:
            low, high = int(m.min()), int(m.max())
            if len(self._table) == 0 or low < self._low or \
                    high >= self._low + len(self._table):
                self._grow(low, high)
        return self._table[m - self._low]

    def value(self, m: int) -> float:
        index = m - self._low
        if index < 0 or index >= len(self._list):
            self._grow(m, m)
            index = m - self._low
        return self._list[index]

    def __call__(self, m):
        return self.values(m)


def _provider(provider, z0, v):
    if isinstance(provider, LatticePhi):
        return provider
    if v is None:
        raise InvalidInputError("the jump vector v is required")
    return LatticePhi(provider, z0, v)


@dataclasses.dataclass(frozen=True, eq=False)
class ChainOrbit:
    """
    A realization of the difference chain.

    :Attributes:
     - `z0`, `v`: the lattice origin and step
     - `lattice`: m_n for n = 0..N
     - `plus`, `minus`, `hold`: the move counters
     - `histogram`: the occupation histogram of z_1, ..., z_N
    """
    z0: np.ndarray
    v: np.ndarray
    lattice: np.ndarray
    plus: int
    minus: int
    hold: int
    histogram: analysis.Histogram

    @property
    def length(self):
        return len(self.lattice) - 1

    def differences(self):
        return torus.wrap(self.z0 + self.lattice[:, None] * self.v)

    def to_dict(self):
        return {"length": self.length, "plus": self.plus,
                "minus": self.minus, "hold": self.hold,
                "final_index": int(self.lattice[-1])}


def _occupation(z0, v, lattice, bins):
    unique, counts = np.unique(lattice[1:], return_counts=True)
    points = torus.wrap(z0 + unique[:, None] * v)
    return analysis.Histogram.from_points(points, bins, centered=True,
                                          weights=counts.astype(float))


def chain_orbit(z0, N: int, phi_provider, noise: NoiseStream, v=None,
                bins=64) -> ChainOrbit:
    """
    Runs the chain for N steps. Each step draws one uniform s and moves
    by +v when s < φ/2, by −v when φ/2 <= s < φ and holds otherwise.

    :Parameters:
     - `z0`: the initial difference
     - `N`: the number of steps (>= 1)
     - `phi_provider`: a :class:`LatticePhi` or anything it accepts
     - `noise`: the :class:`rotsync.rds.NoiseStream`
     - `v` (optional): the jump vector, unless given by the provider
     - `bins` (optional): bins per axis of the occupation histogram
    """
    if N < 1:
        raise InvalidInputError(f"chain length must be >= 1: {N}")

    provider = _provider(phi_provider, z0, v)
    value = provider.value
    lattice = np.empty(N + 1, dtype=np.int64)
    lattice[0] = 0

    rng = noise.generator("chain")
    m, plus, minus, i = 0, 0, 0, 1
    for start in range(0, N, 1 << 16):
        for s in rng.random(min(1 << 16, N - start)).tolist():
            p = value(m)
            if s < p / 2:
                m += 1
                plus += 1
            elif s < p:
                m -= 1
                minus += 1
            lattice[i] = m
            i += 1

    return ChainOrbit(
        z0=provider.z0, v=provider.v, lattice=lattice, plus=plus,
        minus=minus, hold=N - plus - minus,
        histogram=_occupation(provider.z0, provider.v, lattice, bins))


def _geometric(s, p):
    """
    Holding times t >= 1 with P(t = i) = p·(1 − p)^(i − 1), by inverse
    transform of the uniforms `s`. p = 0 gives an infinite time.
    """
    s, p = np.asarray(s, dtype=float), np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.ceil(np.log1p(-s) / np.log1p(-p))
    t = np.where(p >= 1.0, 1.0, t)
    t = np.where(p <= 0.0, np.inf, t)
    return np.maximum(t, 1.0)


@dataclasses.dataclass(frozen=True, eq=False)
class WalkRealization:
    """
    The slowed random walk.

    :Attributes:
     - `z0`, `v`: the lattice origin and step
     - `sites`: the walk c_0 = 0, c_1, ... (lattice indices)
     - `holding_times`: t_1, t_2, ...; t_j is the time spent at the
       site c_(j-1); the last one is cut to end right after time N
     - `horizon`: N
     - `stalled`: whether a zero φ stopped the walk away from 0
    """
    z0: np.ndarray
    v: np.ndarray
    sites: np.ndarray
    holding_times: np.ndarray
    horizon: int
    stalled: bool = False

    def arrival_times(self):
        """
        T_j = t_1 + ... + t_j for j = 0, 1, ...
        """
        return np.concatenate([[0], np.cumsum(self.holding_times)])

    def J(self, n):
        """
        J(n) = max{j : t_1 + ... + t_j <= n}.
        """
        return np.searchsorted(self.arrival_times(), n, side="right") - 1

    def positions(self):
        return torus.wrap(self.z0 + self.sites[:, None] * self.v)


def slowed_orbit(z0, N: int, phi_provider, noise: NoiseStream, v=None,
                 bins=64, hold_scale=1.0):
    """
    Simulates the ±v walk c_j and draws the holding time at each site
    from the geometric law with success probability φ(z̃_j)/hold_scale,
    so its mean is hold_scale/φ(z̃_j). The slowed process
    Z_n = z̃_(J(n)) is exposed for n <= N; a holding time running past N
    is truncated.

    :Returns: the (ChainOrbit, WalkRealization) pair
    """
    if N < 1:
        raise InvalidInputError(f"chain length must be >= 1: {N}")

    provider = _provider(phi_provider, z0, v)
    rng = noise.generator("chain")
    sites, times = [0], []
    c, elapsed, stalled = 0, 0, False

    while elapsed < N:
        p = provider.value(c) / hold_scale
        if p <= 0.0:
            if c != 0 or np.any(provider.z0):
                _logger.warning(
                    "φ vanishes at the walk site %s; the walk stalls "
                    "until the horizon %d", provider.positions(c).tolist(),
                    N)
                stalled = True
            times.append(N + 1 - elapsed)
            break

        s, step = rng.random(2)
        t = float(_geometric(s, p))
        if elapsed + t > N:
            # truncated: the site is kept up to and including time N
            times.append(N + 1 - elapsed)
            break

        times.append(int(t))
        elapsed += int(t)
        c += 1 if step < 0.5 else -1
        sites.append(c)

    sites = np.asarray(sites, dtype=np.int64)
    holding = np.asarray(times, dtype=np.int64)
    walk = WalkRealization(z0=provider.z0, v=provider.v, sites=sites,
                           holding_times=holding, horizon=N,
                           stalled=stalled)

    lattice = sites[walk.J(np.arange(N + 1))]
    moves = np.diff(lattice)
    plus, minus = int(np.sum(moves == 1)), int(np.sum(moves == -1))
    orbit = ChainOrbit(
        z0=provider.z0, v=provider.v, lattice=lattice, plus=plus,
        minus=minus, hold=N - plus - minus,
        histogram=_occupation(provider.z0, provider.v, lattice, bins))
    return orbit, walk


def holding_time_summary(walk: WalkRealization, delta=0.05):
    """
    The mean holding time per walk step (which tends to Z when 1/φ is
    integrable and grows without bound otherwise) and the fraction of
    the slowed time spent outside U_delta(0).
    """
    times = walk.holding_times.astype(float)
    distances = np.atleast_1d(torus.norm(walk.positions()[:len(times)]))
    outside = float(np.sum(times[distances >= delta]) / np.sum(times))
    return {"steps": int(len(times)),
            "mean_holding_time": float(np.mean(times)),
            "outside_fraction": outside,
            "stalled": walk.stalled}


def chain_lattice_samples(z0, n: int, trials: int, phi_provider,
                          noise: NoiseStream, v=None) -> np.ndarray:
    """
    m_n of the chain at time n over independent trials.
    """
    provider = _provider(phi_provider, z0, v)
    rng = noise.generator("chain")
    m = np.zeros(trials, dtype=np.int64)
    for _ in range(n):
        p = provider.values(m)
        s = rng.random(trials)
        m += (s < p / 2).astype(np.int64) - \
            ((s >= p / 2) & (s < p)).astype(np.int64)
    return m


def slowed_lattice_samples(z0, n: int, trials: int, phi_provider,
                           noise: NoiseStream, v=None, hold_scale=1.0) \
        -> np.ndarray:
    """
    The index c_(J(n)) of the slowed walk at time n over independent
    trials.
    """
    provider = _provider(phi_provider, z0, v)
    rng = noise.generator("chain")
    c = np.zeros(trials, dtype=np.int64)
    elapsed = np.zeros(trials)
    active = np.ones(trials, dtype=bool)

    while np.any(active):
        idx = np.flatnonzero(active)
        p = provider.values(c[idx]) / hold_scale
        elapsed[idx] += _geometric(rng.random(len(idx)), p)

        moved = elapsed[idx] <= n
        steps = np.where(rng.random(len(idx)) < 0.5, 1, -1)
        c[idx[moved]] += steps[moved]
        active[idx[~moved]] = False
    return c


@dataclasses.dataclass(frozen=True)
class EquivalenceResult:
    """
    A chi-square comparison of two samples of lattice indices.

    :Attributes:
     - `statistic`, `dof`, `p_value`: the test outcome
     - `states`: the first lattice index of every pooled group
     - `counts`: the (2, groups) table of pooled counts
    """
    statistic: float
    dof: int
    p_value: float
    states: tuple
    counts: tuple

    def to_dict(self):
        return dataclasses.asdict(self)


def pooled_table(sample1, sample2):
    """
    The 2-row contingency table of the lattice indices of both samples
    with adjacent indices pooled until every expected count is at least
    5. Returns (first index of each group, table).
    """
    states = np.union1d(sample1, sample2)
    table = np.stack([
        np.searchsorted(np.sort(sample), states, side="right") -
        np.searchsorted(np.sort(sample), states, side="left")
        for sample in (sample1, sample2)])

    row_share = table.sum(axis=1) / table.sum()
    starts, group = [], np.zeros(2)
    groups = []
    for state, column in zip(states, table.T):
        if not group.any():
            starts.append(int(state))
        group = group + column
        if np.min(row_share * group.sum()) >= MIN_EXPECTED:
            groups.append(group)
            group = np.zeros(2)

    if group.any():
        if groups:
            groups[-1] = groups[-1] + group
            starts.pop()
        else:
            groups.append(group)
    return starts, np.array(groups).T


def law_equivalence_test(z0, n: int, trials: int, noise: NoiseStream,
                         phi_provider, v=None, hold_scale=1.0) \
        -> EquivalenceResult:
    """
    Compares the law of m_n under the direct chain with the law of the
    slowed walk index at time n by a chi-square test over the reachable
    states (pooled to expected counts >= 5).

    :Raises: :class:`rotsync.errors.UnderpoweredTestError` with fewer
      than 10^4 trials
    """
    if trials < MIN_TRIALS:
        raise UnderpoweredTestError(
            f"{trials} trials are too few; at least {MIN_TRIALS} needed")

    provider = _provider(phi_provider, z0, v)
    direct = chain_lattice_samples(z0, n, trials, provider,
                                   noise.substream(0))
    slowed = slowed_lattice_samples(z0, n, trials, provider,
                                    noise.substream(1),
                                    hold_scale=hold_scale)

    starts, table = pooled_table(direct, slowed)
    if table.shape[1] < 2:
        return EquivalenceResult(0.0, 0, 1.0, tuple(starts),
                                 tuple(map(tuple, table.tolist())))

    statistic, p_value, dof, _ = stats.chi2_contingency(table,
                                                        correction=False)
    return EquivalenceResult(float(statistic), int(dof), float(p_value),
                             tuple(starts),
                             tuple(map(tuple, table.astype(int).tolist())))


def _bin_shares(indices, size, bins):
    """
    Bin assignments of grid cells of centered layouts: a cell whose
    center lies on a bin edge is shared half and half. Yields (bin
    coordinates, share) pairs per axis combination.
    """
    numerator = 2 * indices * bins + size
    low = (numerator // (2 * size)) % bins
    on_edge = numerator % (2 * size) == 0
    return low, (low - 1) % bins, on_edge


def predicted_density(profile: displacement.DisplacementProfile,
                      bins: int) -> analysis.Histogram:
    """
    The stationary measure (1/Z)·dz/φ(z) on a centered layout with
    `bins` bins per axis. The uniform grid cells are summed with the
    rectangle rule; the cube around 0 inside bin 0 gets the integral of
    the fitted power law.

    :Raises: :class:`rotsync.errors.NotIntegrableError` unless the
      profile verdict is "converges"
    """
    size, k = profile.uniform_size, profile.dimension
    half_cells = max(0, math.floor(size / (2 * bins) - 0.5))
    indices, masses, cube = displacement.reciprocal_cells(profile,
                                                          half_cells)

    low, below, on_edge = _bin_shares(indices, size, bins)
    counts = np.zeros((bins,) * k)
    # each axis of a cell on a bin edge splits its mass in two
    for choice in np.ndindex(*(2,) * k):
        choice = np.asarray(choice, dtype=bool)
        weight = np.prod(np.where(on_edge, 0.5, ~choice), axis=-1)
        coords = np.where(choice, below, low)
        np.add.at(counts, tuple(coords.T), masses * weight)

    counts[(0,) * k] += cube
    return analysis.Histogram.from_masses(counts / counts.sum(),
                                          centered=True)


def occupation_compare(orbit: ChainOrbit, predicted: analysis.Histogram,
                       exclude_zero_bin=False) -> float:
    """
    The total variation distance between the occupation histogram of
    the orbit and a predicted histogram of the same layout. With
    `exclude_zero_bin` both are renormalized without the bin of 0.
    """
    empirical = orbit.histogram
    empirical.check_layout(predicted)
    if exclude_zero_bin:
        empirical = empirical.without_zero_bin()
        predicted = predicted.without_zero_bin()
    return analysis.histogram_distance(empirical, predicted, analysis.TV)
