#!/usr/bin/env python3

"""
The displacement function φ_A(ε) = Leb(A Δ T_ε(A)) of a set A.

This module evaluates φ exactly for interval and box unions (and by
Monte Carlo for sets only known through a membership oracle),
tabulates it over a grid (:class:`DisplacementProfile`), fits the power
law φ(ε) ≈ c·dist(ε, 0)^α near 0 and derives from the fit:

 - the integrability verdict of 1/φ (:func:`classify_integrability`),
 - the normalization constant Z = ∫ dε/φ(ε) (:func:`z_constant`),
 - the translational symmetry and linear lower bound checks.
"""

import concurrent.futures
import dataclasses
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

from . import sets, torus
from .errors import (DegenerateFitError, InvalidInputError,
                     NotIntegrableError)

_logger = logging.getLogger(__name__)

DIVERGES = "diverges"
CONVERGES = "converges"
INCONCLUSIVE = "inconclusive"

# near-zero φ values below this are treated as exact zeros
DEGENERATE_PHI = 1e-14

# beyond this refinement level the rounding of translated endpoints
# dominates the exact values
_MAX_AUTO_FIT_LEVEL = 36
_AUTO_FIT_WIDTH = 10


def _as_set(A):
    if isinstance(A, dict):
        return sets.from_descriptor(A)
    return A


def phi(A, eps) -> float:
    """
    The exact value φ_A(ε) = symm_diff_measure(A, translate_set(A, ε)).

    :Parameters:
     - `A`: an interval union, a box union or a set descriptor
     - `eps`: the translation vector
    """
    A = _as_set(A)
    eps = torus.as_points(eps, dimension=A.dimension)
    if not np.any(torus.wrap(eps)):
        return 0.0
    return sets.symm_diff_measure(A, sets.translate_set(A, eps))


def phi_many(A, eps) -> np.ndarray:
    """
    Vectorized exact φ over a stack of translation vectors, computed as
    2·(Leb A − Leb(A ∩ T_ε A)).
    """
    A = _as_set(A)
    eps = torus.wrap(torus.as_points(eps, dimension=A.dimension))
    values = 2.0 * (sets.measure(A) - sets.overlap_with_translates(A, eps))
    values = np.clip(values, 0.0, None)
    values[~np.any(eps, axis=-1)] = 0.0
    return values


def phi_mc(contains_oracle: Callable, eps, samples: int, seed=None,
           dimension=None) -> Tuple[float, float]:
    """
    Monte Carlo estimate of φ for a set given by its membership oracle.

    Uniform points x are drawn on T^k and the estimator is the fraction
    of points where contains(x) and contains(x − ε) disagree.

    :Parameters:
     - `contains_oracle`: vectorized membership test over (n, k) points
     - `eps`: the translation vector
     - `samples`: number of uniform points (>= 100)
     - `seed` (optional): an int, a :class:`numpy.random.SeedSequence`
       or a :class:`numpy.random.Generator`
     - `dimension` (optional): k, defaults to the length of `eps`

    :Returns: the (estimate, standard error) pair
    """
    if samples < 100:
        raise InvalidInputError("phi_mc needs at least 100 samples")

    eps = torus.wrap(torus.as_points(eps, dimension=dimension)).reshape(-1)
    rng = np.random.default_rng(seed)
    x = rng.random((int(samples), len(eps)))
    if not np.any(eps):
        return 0.0, 0.0

    disagree = (np.asarray(contains_oracle(x)) !=
                np.asarray(contains_oracle(torus.wrap(x - eps))))
    estimate = float(np.mean(disagree))
    stderr = float(np.std(disagree, ddof=1) / math.sqrt(samples))
    return estimate, stderr


def default_directions(dimension):
    """
    The refinement directions: ±1 on the circle; the unit axes and the
    unit diagonals (with their negatives) on T^k.
    """
    if dimension == 1:
        return np.array([[1.0], [-1.0]])

    directions = list(np.eye(dimension))
    if dimension == 2:
        directions += [np.array([1.0, 1.0]) / math.sqrt(2),
                       np.array([1.0, -1.0]) / math.sqrt(2)]
    else:
        directions.append(np.ones(dimension) / math.sqrt(dimension))

    directions = np.array(directions)
    return np.concatenate([directions, -directions])


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """
    The layout of a displacement profile grid: a uniform grid of `size`
    points per axis (0 included) augmented with the refined points
    ±2^-j·d, 1 <= j <= `levels`, along each refinement direction d.

    :Attributes:
     - `size`: points per axis; 1024 for k=1, 128 for k=2 and 32 above
       when left out
     - `levels`: the number of geometric refinement levels
     - `directions`: the refinement directions, see
       :func:`default_directions`
     - `fit_window`: an explicit (low, high) range of dist(ε, 0) for the
       exponent fit; chosen automatically when None
     - `mc_samples`: samples per point for sets given by an oracle
     - `workers`: threads used to evaluate the grid
     - `seed`: seed of the Monte Carlo evaluations
    """
    size: Optional[int] = None
    levels: int = 40
    directions: Optional[Tuple[Tuple[float, ...], ...]] = None
    fit_window: Optional[Tuple[float, float]] = None
    mc_samples: int = 100_000
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.size is not None and self.size < 2:
            raise InvalidInputError(f"grid size must be >= 2: {self.size}")
        if self.levels < 1:
            raise InvalidInputError("refinement levels must be >= 1")

    def uniform_size(self, dimension):
        if self.size is not None:
            return int(self.size)
        return {1: 1024, 2: 128}.get(dimension, 32)

    def uniform_points(self, dimension):
        m = self.uniform_size(dimension)
        axes = [np.arange(m) / m] * dimension
        return np.stack([g.reshape(-1) for g in np.meshgrid(
            *axes, indexing="ij")], axis=-1)

    def refined_points(self, dimension):
        """
        Returns the refined points (wrapped), their levels and their
        distances to 0.
        """
        directions = (default_directions(dimension)
                      if self.directions is None
                      else np.asarray(self.directions, dtype=float))
        levels = np.arange(1, self.levels + 1)
        scales = 2.0 ** -levels
        points = scales[:, None, None] * directions[None, :, :]
        level_of = np.repeat(levels, len(directions))
        return (torus.wrap(points.reshape(-1, dimension)), level_of,
                np.repeat(scales, len(directions)))


@dataclasses.dataclass(frozen=True)
class ExponentFit:
    """
    Least squares fit of log φ = log c + α·log dist(ε, 0).

    :Attributes:
     - `constant`: c
     - `alpha`: α
     - `alpha_low`, `alpha_high`: the 95% confidence interval of α
     - `r_squared`: the coefficient of determination
     - `window`: the (low, high) range of distances fitted
     - `points`: the number of fitted points
    """
    constant: float
    alpha: float
    alpha_low: float
    alpha_high: float
    r_squared: float
    window: Tuple[float, float]
    points: int
    log_distance_mean: float = 0.0
    log_phi_mean: float = 0.0

    def constant_for(self, alpha):
        """
        The constant of the power law with exponent `alpha` through the
        mean point of the fitted data.
        """
        return math.exp(self.log_phi_mean - alpha * self.log_distance_mean)

    def to_dict(self):
        return {k: v for k, v in dataclasses.asdict(self).items()
                if not k.startswith("log_")}


@dataclasses.dataclass(frozen=True, eq=False)
class DisplacementProfile:
    """
    φ_A tabulated over a grid.

    :Attributes:
     - `set_descriptor`: the descriptor of A
     - `dimension`: k
     - `measure`: Leb A
     - `grid`: the (E, k) stack of grid points ε_i
     - `values`: φ_A(ε_i)
     - `stderr`: Monte Carlo standard errors (0 for exact values)
     - `exact`: whether the values were computed exactly
     - `uniform_size`: points per axis of the uniform part of the grid,
       which comes first in `grid`
     - `levels`: the refinement level of each refined point (0 for
       uniform points)
     - `exponent_fit`: the :class:`ExponentFit`
     - `verdict`: one of "diverges", "converges" or "inconclusive"
    """
    set_descriptor: dict
    dimension: int
    measure: float
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    exact: bool
    uniform_size: int
    levels: np.ndarray
    exponent_fit: Optional[ExponentFit] = None
    verdict: Optional[str] = None

    @property
    def distances(self):
        return torus.norm(self.grid)

    @property
    def uniform_count(self):
        return self.uniform_size ** self.dimension

    def uniform_values(self):
        """
        φ over the uniform grid as an array of shape (m,) * k indexed by
        the integer grid coordinates.
        """
        shape = (self.uniform_size,) * self.dimension
        return self.values[:self.uniform_count].reshape(shape)

    def rows(self):
        """
        The profile as CSV-ready rows: the ε coordinates, φ, the exact
        flag and the standard error.
        """
        for eps, value, err in zip(self.grid, self.values, self.stderr):
            row = {f"eps_{i + 1}": float(c) for i, c in enumerate(eps)}
            row.update(phi=float(value), exact=int(self.exact),
                       stderr=float(err))
            yield row

    def to_dict(self, include_grid=False):
        result = {
            "set": self.set_descriptor,
            "dimension": self.dimension,
            "measure": self.measure,
            "exact": self.exact,
            "uniform_size": self.uniform_size,
            "grid_points": len(self.grid),
            "exponent_fit": (self.exponent_fit.to_dict()
                             if self.exponent_fit else None),
            "verdict": self.verdict,
        }
        if include_grid:
            result["grid"] = self.grid.tolist()
            result["values"] = self.values.tolist()
        return result


def _evaluate_chunks(function, points, workers):
    chunks = np.array_split(points, max(1, min(workers * 4, len(points))))
    if workers <= 1:
        return np.concatenate([function(c) for c in chunks])

    with concurrent.futures.ThreadPoolExecutor(workers) as executor:
        return np.concatenate(list(executor.map(function, chunks)))


def _default_fit_window(descriptor):
    if descriptor and descriptor.get("kind") == "cantor":
        base = float(descriptor.get("base", 8))
        depth = int(descriptor["depth"])
        if depth >= 3:
            return base ** -(depth - 1), base ** -2
    return None


def phi_profile(A, grid_spec: GridSpec = None, dimension=None,
                measure=None) -> DisplacementProfile:
    """
    Tabulates φ_A over the grid described by `grid_spec`, fits the
    near-zero exponent and classifies the integrability of 1/φ.

    :Parameters:
     - `A`: an interval union, a box union, a set descriptor or a
       vectorized membership oracle
     - `grid_spec` (optional): the :class:`GridSpec`
     - `dimension` (optional): k, required when `A` is an oracle
     - `measure` (optional): Leb A for oracles; estimated when missing
    """
    grid_spec = grid_spec or GridSpec()
    A = _as_set(A)
    oracle = callable(A) and not isinstance(
        A, (sets.IntervalUnion, sets.BoxUnion))

    if oracle:
        if dimension is None:
            raise InvalidInputError("the dimension of an oracle is required")
        descriptor = {"kind": "oracle", "name": getattr(
            A, "__name__", type(A).__name__)}
    else:
        dimension = A.dimension
        descriptor = sets.to_descriptor(A)

    uniform = grid_spec.uniform_points(dimension)
    refined, refined_levels, _ = grid_spec.refined_points(dimension)
    grid = np.concatenate([uniform, refined])
    levels = np.concatenate([np.zeros(len(uniform), dtype=int),
                             refined_levels])

    if oracle:
        seeds = np.random.SeedSequence(grid_spec.seed).spawn(len(grid))
        results = np.array([
            phi_mc(A, eps, grid_spec.mc_samples, seed, dimension)
            for eps, seed in zip(grid, seeds)])
        values, stderr = results[:, 0], results[:, 1]
        if measure is None:
            probe = np.random.default_rng(grid_spec.seed).random(
                (grid_spec.mc_samples, dimension))
            measure = float(np.mean(A(probe)))
    else:
        # refined points go through the endpoint sweep which keeps the
        # relative accuracy of tiny values
        uniform_values = _evaluate_chunks(
            lambda chunk: phi_many(A, chunk), uniform, grid_spec.workers)
        refined_values = np.array([phi(A, eps) for eps in refined])
        values = np.concatenate([uniform_values, refined_values])
        stderr = np.zeros(len(grid))
        measure = sets.measure(A)

    profile = DisplacementProfile(
        set_descriptor=descriptor, dimension=dimension, measure=measure,
        grid=grid, values=values, stderr=stderr, exact=not oracle,
        uniform_size=grid_spec.uniform_size(dimension), levels=levels)

    window = grid_spec.fit_window or _default_fit_window(descriptor)
    fit = fit_exponent(profile, window)
    profile = dataclasses.replace(profile, exponent_fit=fit)
    return dataclasses.replace(
        profile, verdict=classify_integrability(profile, dimension))


def _radial_profile(profile):
    """
    The refined points reduced to one point per level: the distance to
    0 and the mean of φ over the refinement directions.
    """
    refined = profile.levels > 0
    levels = profile.levels[refined]
    values = profile.values[refined]
    distances = profile.distances[refined]

    unique = np.unique(levels)
    mean_values = np.array([values[levels == j].mean() for j in unique])
    mean_distances = np.array([distances[levels == j].mean()
                               for j in unique])
    return unique, mean_distances, mean_values


def _ols(distances, values):
    x, y = np.log(distances), np.log(values)
    regression = stats.linregress(x, y)
    half_width = stats.t.ppf(0.975, len(x) - 2) * regression.stderr
    return regression, half_width, x, y


def fit_exponent(profile: DisplacementProfile,
                 window: Optional[Tuple[float, float]] = None) \
        -> ExponentFit:
    """
    Fits φ ≈ c·dist(ε, 0)^α by ordinary least squares over the refined
    near-zero points. Without an explicit `window`, every run of
    consecutive refinement levels of a fixed width is tried and the one
    with the highest R² wins (smaller distances win ties).
    """
    levels, distances, values = _radial_profile(profile)
    if not np.any(values >= DEGENERATE_PHI):
        raise DegenerateFitError(
            "all near-zero displacement values vanish; A is likely "
            "invariant under a continuous group of translations")

    usable = values >= DEGENERATE_PHI
    if window is not None:
        low, high = window
        selected = usable & (distances >= low * (1 - 1e-12)) & \
            (distances <= high * (1 + 1e-12))
        candidates = [selected]
    else:
        usable &= levels <= _MAX_AUTO_FIT_LEVEL
        order = np.flatnonzero(usable)
        width = min(_AUTO_FIT_WIDTH, len(order))
        candidates = []
        for start in range(0, len(order) - width + 1):
            selected = np.zeros(len(levels), dtype=bool)
            selected[order[start:start + width]] = True
            candidates.append(selected)

    best = None
    for selected in candidates:
        if np.count_nonzero(selected) < 3:
            continue
        regression, half_width, x, y = _ols(distances[selected],
                                            values[selected])
        r_squared = regression.rvalue ** 2
        if best is None or r_squared >= best[0] - 1e-12:
            best = (r_squared, regression, half_width, x, y, selected)

    if best is None:
        raise DegenerateFitError(
            f"fewer than 3 usable near-zero points in the fit window "
            f"{window}")

    r_squared, regression, half_width, x, y, selected = best
    return ExponentFit(
        constant=math.exp(regression.intercept),
        alpha=float(regression.slope),
        alpha_low=float(regression.slope - half_width),
        alpha_high=float(regression.slope + half_width),
        r_squared=float(r_squared),
        window=(float(distances[selected].min()),
                float(distances[selected].max())),
        points=int(np.count_nonzero(selected)),
        log_distance_mean=float(x.mean()),
        log_phi_mean=float(y.mean()))


@dataclasses.dataclass(frozen=True)
class SymmetryCheck:
    """
    The outcome of :func:`symmetry_check`; truthy when A has no
    translational symmetry on the grid.
    """
    passed: bool
    min_value: float
    witness: Optional[torus.TranslationVector]

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {"passed": self.passed, "min_value": self.min_value,
                "witness": list(self.witness) if self.witness else None}


def symmetry_check(profile: DisplacementProfile, tolerance=0.01,
                   threshold=1e-12) -> SymmetryCheck:
    """
    Checks that min φ over the grid points outside U_tolerance(0)
    exceeds `threshold`. On failure the grid point where φ is smallest
    is returned as the witness.
    """
    if 1.0 / profile.uniform_size > tolerance:
        _logger.warning(
            "grid spacing %g is coarser than the symmetry tolerance %g",
            1.0 / profile.uniform_size, tolerance)

    outside = profile.distances >= tolerance
    if not np.any(outside):
        return SymmetryCheck(True, math.inf, None)

    values = np.where(outside, profile.values, np.inf)
    index = int(np.argmin(values))
    min_value = float(values[index])
    if min_value > threshold:
        return SymmetryCheck(True, min_value, None)

    return SymmetryCheck(False, min_value,
                         torus.TranslationVector(profile.grid[index]))


def alpha_lower_bound(profile: DisplacementProfile) -> float:
    """
    min over the nonzero grid points of φ(u)/dist(u, 0): the best
    constant of a linear lower bound φ(u) >= α̂·dist(u, 0).
    """
    distances = profile.distances
    nonzero = distances > 0
    return float(np.min(profile.values[nonzero] / distances[nonzero]))


def lower_bound_near_zero(profile: DisplacementProfile, radius) -> float:
    """
    The same bound as :func:`alpha_lower_bound` restricted to the grid
    points with 0 < dist(u, 0) <= radius.
    """
    distances = profile.distances
    near = (distances > 0) & (distances <= radius)
    if not np.any(near):
        raise InvalidInputError(f"no grid point within radius {radius}")
    return float(np.min(profile.values[near] / distances[near]))


def classify_integrability(profile: DisplacementProfile, dimension=None,
                           tolerance=0.05, lower_bound_threshold=1e-3) -> str:
    """
    Compares the confidence interval of the fitted exponent α with the
    dimension k: 1/φ is not integrable when the whole interval lies at
    or above k (up to `tolerance`), integrable when it lies below.

    In dimension k >= 2, a set without translational symmetries whose
    linear lower bound constant stays above `lower_bound_threshold` has
    an integrable 1/φ regardless of the fit.
    """
    dimension = dimension or profile.dimension
    fit = profile.exponent_fit
    if fit is None:
        fit = fit_exponent(profile)

    if dimension >= 2 and symmetry_check(profile) and \
            alpha_lower_bound(profile) > lower_bound_threshold:
        return CONVERGES

    boundary = dimension - tolerance
    if fit.alpha_low >= boundary:
        return DIVERGES
    if fit.alpha_high < boundary:
        return CONVERGES
    return INCONCLUSIVE


def _check_integrable(profile):
    if profile.verdict != CONVERGES:
        raise NotIntegrableError(
            f"1/φ is not known to be integrable (verdict: "
            f"{profile.verdict})")


def _ball_volume(dimension, radius):
    return math.pi ** (dimension / 2) / special.gamma(dimension / 2 + 1) * \
        radius ** dimension


def power_tail(dimension, half_width, constant, alpha) -> float:
    """
    ∫ dε / (c·|ε|^α) over the cube [-δ, δ]^k, δ = `half_width`. The
    square is integrated exactly in polar coordinates; above k = 2 the
    cube is replaced by the ball of the same volume.
    """
    if alpha >= dimension:
        return math.inf

    delta, power = half_width, dimension - alpha
    if dimension == 1:
        return 2 * delta ** power / (constant * power)
    if dimension == 2:
        value, _ = integrate.quad(
            lambda theta: (delta / math.cos(theta)) ** power / power,
            0.0, math.pi / 4)
        return 8 * value / constant

    radius = ((2 * delta) ** dimension / _ball_volume(dimension, 1.0)) ** \
        (1 / dimension)
    sphere = 2 * math.pi ** (dimension / 2) / special.gamma(dimension / 2)
    return sphere * radius ** power / (constant * power)


def power_ball(dimension, radius, constant, alpha) -> float:
    """
    ∫ dε / (c·|ε|^α) over the ball U_radius(0).
    """
    if alpha >= dimension:
        return math.inf
    sphere = 2 * math.pi ** (dimension / 2) / special.gamma(dimension / 2)
    power = dimension - alpha
    return sphere * radius ** power / (constant * power)


def _cell_indices(profile, step=1):
    """
    Signed integer coordinates (in units of the uniform spacing) of the
    uniform grid points kept with the given subsampling step.
    """
    m = profile.uniform_size
    axis = np.arange(0, m, step)
    signed = np.where(axis > m // 2, axis - m, axis)
    grids = np.meshgrid(*([signed] * profile.dimension), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def _uniform_subgrid(profile, step):
    values = profile.uniform_values()
    sub = values[(slice(None, None, step),) * profile.dimension]
    return sub.reshape(-1), _cell_indices(profile, step)


def _excluded_half_cells(exclusion_radius, spacing):
    return max(0, math.ceil(exclusion_radius / spacing - 0.5))


def _quadrature(profile, exclusion_radius, step, alpha, constant):
    """
    Rectangle rule for ∫ dε/φ outside a cube around 0 plus the power
    law integral over the cube. Returns (sum, tail, cube half-width).
    """
    spacing = step / profile.uniform_size
    values, indices = _uniform_subgrid(profile, step)
    kept = _excluded_half_cells(exclusion_radius, spacing)
    outside = np.max(np.abs(indices // step), axis=-1) > kept

    if np.any(values[outside] <= 0.0):
        raise NotIntegrableError(
            "φ vanishes on the grid away from 0; A has a translational "
            "symmetry")

    half_width = (kept + 0.5) * spacing
    grid_sum = float(np.sum(spacing ** profile.dimension /
                            values[outside]))
    return grid_sum, power_tail(profile.dimension, half_width, constant,
                                alpha), half_width


def z_constant(profile: DisplacementProfile, exclusion_radius=0.01) \
        -> Tuple[float, float]:
    """
    The normalization constant Z = ∫ dε/φ_A(ε) over T^k.

    Outside the cube of half-width ≈ `exclusion_radius` around 0 the
    integral is a rectangle rule over the uniform grid; inside it the
    fitted power law is integrated analytically.

    :Returns: the (estimate, error bound) pair. The bound adds the
      difference with the same rule on the grid of twice the spacing
      and the spread of the tail over the confidence interval of α.
    """
    _check_integrable(profile)
    if exclusion_radius <= 0 or exclusion_radius >= 0.5:
        raise InvalidInputError(
            f"exclusion radius out of range: {exclusion_radius}")

    fit = profile.exponent_fit
    grid_sum, tail, half_width = _quadrature(
        profile, exclusion_radius, 1, fit.alpha, fit.constant)
    estimate = grid_sum + tail

    error = 0.0
    if profile.uniform_size % 2 == 0:
        coarse_sum, coarse_tail, _ = _quadrature(
            profile, exclusion_radius, 2, fit.alpha, fit.constant)
        error += abs(estimate - coarse_sum - coarse_tail)

    spread = [abs(power_tail(profile.dimension, half_width,
                             fit.constant_for(alpha), alpha) - tail)
              for alpha in (fit.alpha_low, fit.alpha_high)]
    error += max(spread)
    return estimate, error


def mu_bar_mass(profile: DisplacementProfile, radius,
                exclusion_radius=0.01) -> float:
    """
    μ̄(U_radius(0)), the mass the stationary measure (1/Z)·dε/φ gives to
    the ball of the given radius around 0.
    """
    _check_integrable(profile)
    fit = profile.exponent_fit
    z, _ = z_constant(profile, exclusion_radius)

    spacing = 1.0 / profile.uniform_size
    kept = _excluded_half_cells(exclusion_radius, spacing)
    half_width = (kept + 0.5) * spacing
    if radius <= half_width:
        return power_ball(profile.dimension, radius, fit.constant,
                          fit.alpha) / z

    values, indices = _uniform_subgrid(profile, 1)
    outside = np.max(np.abs(indices), axis=-1) > kept
    near = outside & (np.sqrt(np.sum((indices * spacing) ** 2, axis=-1))
                      < radius)
    mass = float(np.sum(spacing ** profile.dimension / values[near]))
    tail = power_tail(profile.dimension, half_width, fit.constant,
                      fit.alpha)
    return min(1.0, (mass + tail) / z)


def reciprocal_cells(profile: DisplacementProfile, exclusion_half_cells):
    """
    The rectangle rule masses spacing^k/φ of the uniform grid cells
    outside the cube of `exclusion_half_cells` cells around 0, together
    with the power law mass of that cube.

    :Returns: (indices, masses, cube mass) where `indices` are the
      signed integer grid coordinates of the kept cells
    """
    _check_integrable(profile)
    fit = profile.exponent_fit
    spacing = 1.0 / profile.uniform_size
    values, indices = _uniform_subgrid(profile, 1)
    outside = np.max(np.abs(indices), axis=-1) > exclusion_half_cells

    if np.any(values[outside] <= 0.0):
        raise NotIntegrableError("φ vanishes on the grid away from 0")

    half_width = (exclusion_half_cells + 0.5) * spacing
    cube = power_tail(profile.dimension, half_width, fit.constant,
                      fit.alpha)
    return (indices[outside],
            spacing ** profile.dimension / values[outside], cube)


def phi_product(factors: Sequence, eps, measures=None) -> float:
    """
    φ of a product set A_1 × ... × A_k from the φ of its factors:
    2·(Π Leb A_i − Π (Leb A_i − φ_i(ε_i)/2)).

    :Parameters:
     - `factors`: one-dimensional sets or callables returning φ_i
     - `eps`: the k-dimensional translation vector
     - `measures` (optional): Leb A_i; required for callable factors
    """
    eps = torus.as_points(eps, dimension=len(factors))
    if measures is None:
        measures = [sets.measure(f) for f in factors]

    full, overlap = 1.0, 1.0
    for factor, size, e in zip(factors, measures, eps):
        value = phi(factor, e) if isinstance(
            factor, (sets.IntervalUnion, dict)) else float(factor(e))
        full *= size
        overlap *= size - value / 2
    return 2 * (full - overlap)


def cantor_remainder(spec: sets.CantorSpec) -> float:
    """
    Leb(M_n ∖ A) for the Cantor approximant M_n of `spec`.
    """
    return spec.remainder


def cantor_predicted_alpha(base=8) -> float:
    """
    The near-zero exponent 1 − log 2/log base of the limit Cantor set.
    """
    return sets.CantorSpec(0, base).predicted_alpha
