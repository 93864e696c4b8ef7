#!/usr/bin/env python3

"""
The random dynamical system of a double rotation.

The map f translates the points of A by v and fixes the others; the
random maps are f_u = T_u ∘ f with u uniform on T^k. This module drives
forward compositions F^n = f_(w_n) ∘ ... ∘ f_(w_1) of one point, of a
coupled pair of points and of particle ensembles, as well as reversed
compositions f_(w_1) ∘ ... ∘ f_(w_n) and their exact images of the
whole circle.

All the randomness comes from a :class:`NoiseStream`; the same
(master seed, stream id) pair always reproduces the same noise.
"""

import bisect
import dataclasses
import fractions
import logging
import math
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from . import analysis, displacement, sets, torus
from .errors import CapacityError, InvalidInputError

_logger = logging.getLogger(__name__)

# the noise is drawn in blocks of this many steps
NOISE_BLOCK = 1 << 16

DEFAULT_MAX_COMPONENTS = 10 ** 6


def default_jump(dimension):
    """
    The default jump vector: √2 − 1 on the circle, (√2 − 1, √3 − 1) on
    T^2 and the fractional parts of the square roots of the first
    primes above.
    """
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    if dimension > len(primes):
        raise InvalidInputError(f"no default jump vector for k={dimension}")
    return torus.wrap([math.sqrt(p) for p in primes[:dimension]])


@dataclasses.dataclass(frozen=True, eq=False)
class SystemConfig:
    """
    A double rotation reduced to "translate by v on A, identity
    elsewhere".

    :Attributes:
     - `A`: an interval union, a box union or a vectorized membership
       oracle over (n, k) points
     - `v`: the jump vector
     - `dimension`: k
     - `base_rotation`: the rotation applied everywhere by the
       unreduced double rotation (see :meth:`from_double_rotation`)
    """
    A: Union[sets.IntervalUnion, sets.BoxUnion, Callable]
    v: np.ndarray
    dimension: int = None
    base_rotation: Optional[np.ndarray] = None

    def __post_init__(self):
        A = self.A
        if isinstance(A, dict):
            A = sets.from_descriptor(A)
            object.__setattr__(self, "A", A)

        dimension = self.dimension or getattr(A, "dimension", None) or \
            torus.as_points(self.v).shape[-1]
        v = torus.wrap(torus.as_points(self.v, dimension=dimension))
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "dimension", dimension)

        base = np.zeros(dimension) if self.base_rotation is None else \
            torus.wrap(torus.as_points(self.base_rotation,
                                       dimension=dimension))
        base.setflags(write=False)
        object.__setattr__(self, "base_rotation", base)

        if not np.any(v):
            raise InvalidInputError("the jump vector v must not be 0")

    @classmethod
    def from_double_rotation(cls, A, v1, v2):
        """
        The reduced system of the double rotation that translates A by
        `v1` and its complement by `v2`: the jump is v1 − v2 and `v2`
        is kept as :attr:`base_rotation`.
        """
        v1, v2 = torus.as_points(v1), torus.as_points(v2)
        return cls(A, torus.diff(v1, v2), base_rotation=v2)

    @property
    def is_oracle(self):
        return not isinstance(self.A, (sets.IntervalUnion, sets.BoxUnion))

    def contains(self, points):
        points = torus.as_points(points, dimension=self.dimension)
        if self.is_oracle:
            return np.asarray(self.A(points.reshape(-1, self.dimension)),
                              dtype=bool).reshape(points.shape[:-1])
        return np.asarray(sets.contains(self.A, points), dtype=bool)

    def scalar_contains(self):
        """
        A fast membership test for one point given as a tuple of floats.
        """
        A = self.A
        if isinstance(A, sets.IntervalUnion):
            lefts, rights = A.lefts.tolist(), A.rights.tolist()

            def contains(point):
                i = bisect.bisect_right(lefts, point[0]) - 1
                return i >= 0 and point[0] < rights[i]
            return contains

        if isinstance(A, sets.BoxUnion):
            boxes = list(zip(A.lows.tolist(), A.highs.tolist()))

            def contains(point):
                return any(all(lo <= c < hi for c, lo, hi in
                               zip(point, low, high))
                           for low, high in boxes)
            return contains

        return lambda point: bool(self.contains(np.array(point))
                                  .reshape(-1)[0])

    def descriptor(self):
        return {
            "dimension": self.dimension,
            "set": ({"kind": "oracle"} if self.is_oracle
                    else sets.to_descriptor(self.A)),
            "v": self.v.tolist(),
        }

    def validate(self, grid_size=None):
        """
        Logs warnings for the standing assumptions that fail: A should
        have no translational symmetry and the coordinates of v should
        be rationally independent together with 1. Returns the list of
        warnings.
        """
        warnings = []
        for i, c in enumerate(self.v):
            approx = fractions.Fraction(float(c)).limit_denominator(1000)
            if abs(float(approx) - c) < 1e-9:
                warnings.append(f"v[{i}] = {c!r} is close to the rational "
                                f"{approx}")

        if not self.is_oracle:
            size = grid_size or {1: 1024, 2: 64}.get(self.dimension, 16)
            grid = displacement.GridSpec(size=size).uniform_points(
                self.dimension)
            values = displacement.phi_many(self.A, grid)
            outside = torus.norm(grid) >= 0.01
            if np.any(outside) and np.min(values[outside]) <= 1e-12:
                witness = grid[outside][np.argmin(values[outside])]
                warnings.append(f"A looks invariant under the translation "
                                f"by {witness.tolist()}")

        for warning in warnings:
            _logger.warning(warning)
        return warnings


def apply_f(cfg: SystemConfig, x):
    """
    f(x): x + v (mod 1) when x ∈ A, x otherwise. Works on a point or on
    a stack of points.
    """
    points = torus.wrap(torus.as_points(x, dimension=cfg.dimension))
    inside = cfg.contains(points)
    return torus.wrap(points + inside[..., None] * cfg.v)


def apply_double_rotation(cfg: SystemConfig, x):
    """
    The unreduced double rotation: translation by v + base rotation on
    A and by the base rotation elsewhere.
    """
    return torus.wrap(apply_f(cfg, x) + cfg.base_rotation)


_PURPOSES = {"maps": 0, "particles": 1, "chain": 2, "probes": 3}


@dataclasses.dataclass(frozen=True)
class NoiseStream:
    """
    A reproducible source of the i.i.d. uniform noise w_1, w_2, ...

    Each purpose ("maps" for the map noise, "particles" for initial
    ensembles, "chain" for the difference chain variates, "probes" for
    Monte Carlo probes) has its own counter-based generator keyed by
    (master_seed, stream_id, purpose).
    """
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise InvalidInputError(
                f"master seed must be an unsigned 64 bit integer: "
                f"{self.master_seed}")

    def generator(self, purpose="maps") -> np.random.Generator:
        try:
            key = _PURPOSES[purpose]
        except KeyError:
            raise InvalidInputError(f"unknown noise purpose {purpose!r}")

        sequence = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_id, key))
        return np.random.Generator(np.random.Philox(sequence))

    def substream(self, index):
        """
        An independent stream for the `index`-th trial of this one.
        """
        return NoiseStream(self.master_seed,
                           self.stream_id * 1_000_003 + index + 1)

    def blocks(self, n, dimension, block=NOISE_BLOCK):
        """
        Yields w_1, ..., w_n in blocks of at most `block` rows. Any n
        yields a prefix of the same sequence.
        """
        rng = self.generator("maps")
        for start in range(0, n, block):
            yield rng.random((min(block, n - start), dimension))

    def increments(self, n, dimension):
        """
        The (n, k) array w_1, ..., w_n.
        """
        if n == 0:
            return np.empty((0, dimension))
        return np.concatenate(list(self.blocks(n, dimension)))


def forward_orbit(cfg: SystemConfig, x, n: int, noise: NoiseStream):
    """
    The orbit x_0 = x, x_i = f(x_(i-1)) + w_i (mod 1) for i <= n, as an
    (n + 1, k) array.
    """
    if n < 1:
        raise InvalidInputError(f"orbit length must be >= 1: {n}")

    k = cfg.dimension
    contains = cfg.scalar_contains()
    v = cfg.v.tolist()
    point = tuple(torus.wrap(torus.as_points(x, dimension=k)).tolist())

    orbit = np.empty((n + 1, k))
    orbit[0] = point
    i = 1
    for block in noise.blocks(n, k):
        for w in block.tolist():
            shift = v if contains(point) else (0.0,) * k
            point = tuple(_wrap_scalar(c + s + e)
                          for c, s, e in zip(point, shift, w))
            orbit[i] = point
            i += 1
    return orbit


def _wrap_scalar(c):
    c %= 1.0
    return 0.0 if c >= 1.0 else c


@dataclasses.dataclass(frozen=True, eq=False)
class TwoPointTrace:
    """
    Two points driven by the same noise.

    :Attributes:
     - `z0`: the initial difference x_0 − y_0
     - `v`: the jump vector
     - `distances`: dist(x_n, y_n) for n = 0..N
     - `lattice`: m_n with x_n − y_n = z0 + m_n·v (mod 1)
     - `x`, `y`: the trajectories, (N + 1, k) arrays
    """
    z0: np.ndarray
    v: np.ndarray
    distances: np.ndarray
    lattice: np.ndarray
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    @property
    def length(self):
        return len(self.distances) - 1

    def differences(self):
        """
        z_n = z0 + m_n·v (mod 1) as an (N + 1, k) array.
        """
        return torus.wrap(self.z0 + self.lattice[:, None] * self.v)

    def occupancy(self, bins, centered=True) -> analysis.Histogram:
        return analysis.Histogram.from_points(
            self.differences()[1:], bins, centered=centered)

    def rows(self):
        for n, (d, m) in enumerate(zip(self.distances.tolist(),
                                       self.lattice.tolist())):
            yield {"step": n, "distance": d, "lattice_index": m}


def two_point_orbit(cfg: SystemConfig, x, y, n: int, noise: NoiseStream,
                    keep_positions=True) -> TwoPointTrace:
    """
    Drives x and y with the identical noise for n steps. The lattice
    index follows m_i = m_(i-1) + 1_A(x_(i-1)) − 1_A(y_(i-1)).
    """
    if n < 1:
        raise InvalidInputError(f"orbit length must be >= 1: {n}")

    k = cfg.dimension
    contains = cfg.scalar_contains()
    v = cfg.v.tolist()
    zero = (0.0,) * k
    px = tuple(torus.wrap(torus.as_points(x, dimension=k)).tolist())
    py = tuple(torus.wrap(torus.as_points(y, dimension=k)).tolist())
    z0 = torus.diff(px, py)

    lattice = np.zeros(n + 1, dtype=np.int64)
    xs, ys = np.empty((n + 1, k)), np.empty((n + 1, k))
    xs[0], ys[0] = px, py

    m, i = 0, 1
    for block in noise.blocks(n, k):
        for w in block.tolist():
            in_x, in_y = contains(px), contains(py)
            m += int(in_x) - int(in_y)
            sx, sy = (v if in_x else zero), (v if in_y else zero)
            px = tuple(_wrap_scalar(c + s + e) for c, s, e in zip(px, sx, w))
            py = tuple(_wrap_scalar(c + s + e) for c, s, e in zip(py, sy, w))
            xs[i], ys[i] = px, py
            lattice[i] = m
            i += 1

    distances = np.atleast_1d(torus.torus_dist(xs, ys))
    return TwoPointTrace(
        z0=z0, v=cfg.v, distances=distances, lattice=lattice,
        x=xs if keep_positions else None, y=ys if keep_positions else None)


def two_point_lattice_samples(cfg: SystemConfig, z0, n: int, trials: int,
                              noise: NoiseStream) -> np.ndarray:
    """
    The lattice index m_n of x_n − y_n at time n over independent trials
    with y_0 = x_0 − z0 and x_0 uniform. Vectorized across trials.
    """
    k = cfg.dimension
    rng = noise.generator("maps")
    z0 = torus.wrap(torus.as_points(z0, dimension=k))
    x = rng.random((trials, k))
    y = torus.wrap(x - z0)
    m = np.zeros(trials, dtype=np.int64)

    for _ in range(n):
        in_x, in_y = cfg.contains(x), cfg.contains(y)
        m += in_x.astype(np.int64) - in_y.astype(np.int64)
        w = rng.random((trials, k))
        x = torus.wrap(x + in_x[:, None] * cfg.v + w)
        y = torus.wrap(y + in_y[:, None] * cfg.v + w)
    return m


def jump_frequencies(trace: TwoPointTrace, cfg: SystemConfig, bins: int,
                     min_visits=0):
    """
    Per-bin statistics of the jumps of the difference z_n: the visits of
    the bin, the +v and −v jump counts, the predicted jump probability
    (the mean of φ/2 over the visits) and its binomial standard error.

    :Returns: a list of dicts, one per bin with at least `min_visits`
      visits
    """
    states = trace.lattice[:-1]
    jumps = np.diff(trace.lattice)
    z = torus.wrap(trace.z0 + states[:, None] * trace.v)
    index = analysis.Histogram.bin_index(z, (bins,) * cfg.dimension,
                                         centered=True)

    unique, inverse = np.unique(states, return_inverse=True)
    phi_values = displacement.phi_many(
        cfg.A, torus.wrap(trace.z0 + unique[:, None] * trace.v))[inverse]

    n_bins = bins ** cfg.dimension
    visits = np.bincount(index, minlength=n_bins)
    plus = np.bincount(index, weights=(jumps == 1).astype(float),
                       minlength=n_bins)
    minus = np.bincount(index, weights=(jumps == -1).astype(float),
                        minlength=n_bins)
    predicted = np.bincount(index, weights=phi_values / 2,
                            minlength=n_bins)

    rows = []
    for b in np.flatnonzero(visits >= max(min_visits, 1)):
        p = predicted[b] / visits[b]
        rows.append({
            "bin": int(b),
            "visits": int(visits[b]),
            "plus_jumps": int(plus[b]),
            "minus_jumps": int(minus[b]),
            "predicted": float(p),
            "stderr": float(math.sqrt(max(p * (1 - p), 0.0) / visits[b])),
        })
    return rows


@dataclasses.dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """
    A weighted cloud of particles on T^k.

    :Attributes:
     - `positions`: the (M, k) particle positions
     - `weights`: the (M,) weights, summing to 1
    """
    positions: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        positions = torus.wrap(torus.as_points(self.positions))
        if positions.ndim == 1:
            positions = positions[:, None]
        weights = (np.full(len(positions), 1.0 / len(positions))
                   if self.weights is None
                   else np.asarray(self.weights, dtype=float))
        if len(positions) == 0:
            raise InvalidInputError("an ensemble needs at least 1 particle")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise InvalidInputError("ensemble weights must sum to 1")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, M: int, dimension: int, rng: np.random.Generator):
        """
        A stratified (latin hypercube) sample of M uniform points.
        """
        sampler = qmc.LatinHypercube(d=dimension, seed=rng)
        return cls(sampler.random(M))

    @classmethod
    def dirac(cls, point, M=1):
        point = torus.as_points(point)
        return cls(np.tile(point, (M, 1)))

    @property
    def size(self):
        return len(self.positions)

    @property
    def dimension(self):
        return self.positions.shape[1]


@dataclasses.dataclass(frozen=True, eq=False)
class EnsembleSnapshot:
    step: int
    d_value: float
    ensemble: ParticleEnsemble


def _push(cfg, positions, w):
    inside = cfg.contains(positions)
    return torus.wrap(positions + inside[:, None] * cfg.v + w)


def ensemble_forward(cfg: SystemConfig, M: int, n: int, noise: NoiseStream,
                     checkpoints: Sequence[int] = None) \
        -> List[EnsembleSnapshot]:
    """
    Pushes a stratified uniform sample of M particles forward through
    the shared random maps and records D of the empirical measure at
    every checkpoint (step 0 included when listed).
    """
    checkpoints = sorted(set(checkpoints if checkpoints is not None
                             else [0, n]))
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > n):
        raise InvalidInputError(f"checkpoints outside [0, {n}]")

    ensemble = ParticleEnsemble.uniform(M, cfg.dimension,
                                        noise.generator("particles"))
    positions = ensemble.positions
    snapshots = []
    pending = iter(checkpoints)
    target = next(pending, None)

    step = 0
    if target == 0:
        snapshots.append(_snapshot(0, positions))
        target = next(pending, None)

    for block in noise.blocks(n, cfg.dimension):
        for w in block:
            positions = _push(cfg, positions, w)
            step += 1
            if step == target:
                snapshots.append(_snapshot(step, positions))
                target = next(pending, None)
    return snapshots


def _snapshot(step, positions):
    ensemble = ParticleEnsemble(positions.copy())
    return EnsembleSnapshot(step, analysis.d_functional(ensemble), ensemble)


def reversed_ensemble(cfg: SystemConfig, M: int, n: int,
                      noise: NoiseStream) -> ParticleEnsemble:
    """
    The pushforward of a stratified uniform sample by the reversed
    composition f_(w_1) ∘ ... ∘ f_(w_n): f_(w_n) is applied first.
    """
    if n < 1:
        raise InvalidInputError(f"composition length must be >= 1: {n}")

    positions = ParticleEnsemble.uniform(
        M, cfg.dimension, noise.generator("particles")).positions
    for w in noise.increments(n, cfg.dimension)[::-1]:
        positions = _push(cfg, positions, w)
    return ParticleEnsemble(positions)


def reversed_series(cfg: SystemConfig, M: int, checkpoints: Sequence[int],
                    noise: NoiseStream) -> List[EnsembleSnapshot]:
    """
    :func:`reversed_ensemble` at every checkpoint, recomputed from
    scratch since reversed compositions do not extend on the left.
    """
    return [_snapshot(n, reversed_ensemble(cfg, M, n, noise).positions)
            for n in sorted(set(checkpoints)) if n >= 1]


def estimate_limit_point(ensemble: ParticleEnsemble) -> torus.TorusPoint:
    """
    The particle position minimizing Σ_i w_i·dist(x_i, m): a geometric
    median of the ensemble restricted to the particle positions.
    """
    sums = analysis.distance_sums(ensemble)
    return torus.TorusPoint(ensemble.positions[int(np.argmin(sums))])


def image_f(cfg: SystemConfig, S: sets.IntervalUnion) -> sets.IntervalUnion:
    """
    f(S) = ((S ∩ A) + v) ∪ (S ∖ A).
    """
    moved = sets.translate_set(sets.intersect(S, cfg.A), cfg.v)
    return sets.union(moved, sets.difference(S, cfg.A))


def _check_exact_images(cfg):
    if cfg.dimension != 1 or not isinstance(cfg.A, sets.IntervalUnion):
        raise InvalidInputError(
            "exact images need k = 1 and A given as an interval union")


def reversed_image_exact(cfg: SystemConfig, n: int, noise: NoiseStream,
                         max_components=DEFAULT_MAX_COMPONENTS) \
        -> sets.IntervalUnion:
    """
    The exact image F_rev^n(S¹) of the whole circle: S¹ is pushed through
    f_(w_n) first and f_(w_1) last, canonicalizing after every map.

    :Raises: :class:`rotsync.errors.CapacityError` when the image has
      more than `max_components` components; the image reached so far
      is attached as the partial result
    """
    _check_exact_images(cfg)
    image = sets.IntervalUnion.full()
    if n == 0:
        return image

    w = noise.increments(n, 1)[::-1, 0]
    for applied, shift in enumerate(w, start=1):
        image = sets.translate_set(image_f(cfg, image), shift)
        if image.component_count > max_components:
            raise CapacityError(
                f"the image has {image.component_count} components after "
                f"{applied} of {n} maps (cap {max_components})",
                partial=image, step=applied)
    return image


def image_measure_mc(cfg: SystemConfig, n: int, noise: NoiseStream,
                     samples=10_000):
    """
    Monte Carlo estimate of Leb(F_rev^n(S¹)) with its binomial standard
    error.

    A uniform probe y lies in the image when it has a preimage under
    f_(w_1), ..., f_(w_n) in turn. Every preimage of y after j maps has
    the form y − (w_1 + ... + w_j) − m·v with 0 <= m <= j, so the search
    tracks the surviving (probe, m) pairs.
    """
    rng = noise.generator("probes")
    probes = rng.random(samples)
    w = noise.increments(n, 1)[:, 0]
    shifts = np.concatenate([[0.0], np.cumsum(w)])
    v = float(cfg.v[0])

    probe_idx = np.arange(samples)
    m = np.zeros(samples, dtype=np.int64)
    for j in range(1, n + 1):
        base = torus.wrap(probes[probe_idx] - shifts[j] - m * v)
        stay = ~cfg.contains(base[:, None])
        jump = cfg.contains(torus.wrap(base - v)[:, None])

        probe_idx = np.concatenate([probe_idx[stay], probe_idx[jump]])
        m = np.concatenate([m[stay], m[jump] + 1])
        keys = np.unique(probe_idx * (n + 1) + m)
        probe_idx, m = keys // (n + 1), keys % (n + 1)

    hit = np.zeros(samples, dtype=bool)
    hit[probe_idx] = True
    estimate = float(hit.mean())
    return estimate, math.sqrt(max(estimate * (1 - estimate), 0.0) / samples)


@dataclasses.dataclass(frozen=True, eq=False)
class AttractorCheckpoint:
    step: int
    image: sets.IntervalUnion
    component_count: int
    measure: float
    largest_gap: float
    largest_component: float
    nested: bool

    def to_dict(self, max_intervals=10 ** 4):
        result = {
            "step": self.step,
            "component_count": self.component_count,
            "measure": self.measure,
            "largest_gap": self.largest_gap,
            "largest_component": self.largest_component,
            "nested": self.nested,
        }
        if len(self.image) <= max_intervals:
            result["arcs"] = [list(a) for a in self.image.arcs]
        return result


@dataclasses.dataclass(frozen=True)
class AttractorReport:
    checkpoints: List[AttractorCheckpoint]

    @property
    def nested(self):
        return all(c.nested for c in self.checkpoints)

    @property
    def measures(self):
        return [c.measure for c in self.checkpoints]

    def to_dict(self, max_intervals=10 ** 4):
        return {"nested": self.nested,
                "checkpoints": [c.to_dict(max_intervals)
                                for c in self.checkpoints]}


def geometric_schedule(n_max: int, ratio=2.0, start=1) -> List[int]:
    """
    start, start·ratio, start·ratio², ... up to n_max (always included).
    """
    schedule, n = [], float(start)
    while n < n_max:
        if not schedule or int(n) > schedule[-1]:
            schedule.append(int(n))
        n *= ratio
    schedule.append(int(n_max))
    return schedule


def attractor_report(cfg: SystemConfig, n_max: int, noise: NoiseStream,
                     checkpoints: Sequence[int] = None,
                     max_components=DEFAULT_MAX_COMPONENTS) \
        -> AttractorReport:
    """
    Exact reversed images of the circle at the checkpoints (a geometric
    schedule by default) with their component counts, measures, largest
    gaps and components. Each image is checked to lie inside the
    previous one.
    """
    _check_exact_images(cfg)
    checkpoints = sorted(set(checkpoints or geometric_schedule(n_max)))

    results, previous = [], None
    for n in checkpoints:
        image = reversed_image_exact(cfg, n, noise, max_components)
        nested = previous is None or sets.is_subset(image, previous)
        results.append(AttractorCheckpoint(
            step=n, image=image, component_count=image.component_count,
            measure=sets.measure(image), largest_gap=image.largest_gap,
            largest_component=image.largest_component, nested=nested))
        previous = image
        _logger.debug("reversed image at step %d has %d components", n,
                      image.component_count)
    return AttractorReport(results)
