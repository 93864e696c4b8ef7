#!/usr/bin/env python3

"""
Geometry primitives on the k-torus T^k = (R/Z)^k.

Points and translation vectors are stored as coordinates in [0, 1)
(fractions of a full turn). Every function accepts a single point (a
scalar for k=1 or a sequence of k numbers) or a stack of points with
shape (..., k) and works on the whole stack at once:

  >>> wrap([2.5, -0.5])
  array([0.5, 0.5])
  >>> torus_dist(0.1, 0.9)
  0.2...
"""

import math
from typing import Sequence, Union

import numpy as np

from .errors import InvalidInputError

ArrayLike = Union[float, Sequence[float], np.ndarray]


def as_points(x, dimension=None):
    """
    Returns `x` as a float array with a trailing coordinate axis. A
    scalar becomes a 1D point.

    :Parameters:
     - `x`: a scalar, a sequence of coordinates or an array (..., k)
     - `dimension` (optional): the expected k
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)

    if dimension is not None and arr.shape[-1] != dimension:
        raise InvalidInputError(
            f"expected points of dimension {dimension}, got shape "
            f"{arr.shape}")

    return arr


def _check_same_dimension(p, q):
    if p.shape[-1] != q.shape[-1]:
        raise InvalidInputError(
            f"dimension mismatch: {p.shape[-1]} != {q.shape[-1]}")


def _reduce(arr):
    result = np.mod(arr, 1.0)
    # tiny negative inputs round up to exactly 1.0
    result[result >= 1.0] = 0.0
    return result


def wrap(x: ArrayLike) -> np.ndarray:
    """
    Reduces every coordinate of `x` modulo 1 into [0, 1).

    :Parameters:
     - `x`: a point or a stack of points
    """
    arr = as_points(x)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"non-finite coordinate in {x!r}")

    return _reduce(arr)


def translate(p: ArrayLike, u: ArrayLike) -> np.ndarray:
    """
    The translation T_u(p) = p + u (mod 1).
    """
    p, u = as_points(p), as_points(u)
    _check_same_dimension(p, u)
    return wrap(p + u)


def negate(u: ArrayLike) -> np.ndarray:
    """
    The inverse translation vector -u (mod 1).
    """
    return wrap(-as_points(u))


def diff(p: ArrayLike, q: ArrayLike) -> np.ndarray:
    """
    The difference p - q (mod 1); translate(q, diff(p, q)) == p.
    """
    p, q = as_points(p), as_points(q)
    _check_same_dimension(p, q)
    return wrap(p - q)


def circle_delta(p: ArrayLike, q: ArrayLike) -> np.ndarray:
    """
    Per-coordinate length of the shorter arc between p and q.
    """
    p, q = as_points(p), as_points(q)
    _check_same_dimension(p, q)
    d = np.abs(_reduce(p) - _reduce(q))
    return np.minimum(d, 1.0 - d)


def torus_dist(p: ArrayLike, q: ArrayLike):
    """
    The flat torus metric: the Euclidean norm of the per-coordinate
    circle distances. Returns a float for single points and an array
    for stacks. The value never exceeds sqrt(k)/2.
    """
    result = np.sqrt(np.sum(circle_delta(p, q) ** 2, axis=-1))
    return float(result) if np.ndim(result) == 0 else result


def norm(u: ArrayLike):
    """
    dist(u, 0).
    """
    u = as_points(u)
    return torus_dist(u, np.zeros(u.shape[-1]))


def max_dist(dimension: int) -> float:
    """
    The diameter sqrt(k)/2 of T^k.
    """
    return math.sqrt(dimension) / 2


class TorusPoint(tuple):
    """
    An immutable point of T^k: a tuple of k coordinates in [0, 1).

    Use :meth:`of` to build one from arbitrary real coordinates; they
    will be wrapped. Instances are plain tuples so they are hashable,
    picklable and accepted by :func:`numpy.asarray`.
    """

    def __new__(cls, coords):
        coords = tuple(float(c) for c in coords)
        if not coords:
            raise InvalidInputError("a torus point needs k >= 1 coordinates")
        if not all(0.0 <= c < 1.0 for c in coords):
            raise InvalidInputError(
                f"coordinates of {cls.__name__} must lie in [0, 1): "
                f"{coords!r}")
        return super().__new__(cls, coords)

    @classmethod
    def of(cls, x: ArrayLike):
        """
        Wraps `x` and returns it as an instance.
        """
        return cls(wrap(x).reshape(-1))

    @property
    def dimension(self) -> int:
        return len(self)

    @property
    def coords(self):
        return tuple(self)

    def __repr__(self):
        return f"{self.__class__.__name__}({tuple(self)!r})"


class TranslationVector(TorusPoint):
    """
    A translation vector of T^k, stored like a :class:`TorusPoint`.
    """

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self)
