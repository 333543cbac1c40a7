"""Exact set algebra for balls and axis-aligned boxes.

Everything the constraint-tightening arithmetic needs: Minkowski sums of
balls, scalar scaling, box-minus-ball erosion, and the composed tightening
of state/input constraint sets by a tube radius.  All values are plain
double-precision; membership tests take an explicit tolerance so sampled
property tests stay deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySetError, InvalidParam

DEFAULT_TOL = 1e-9


def _as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise InvalidParam(f"expected a 1-d vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Ball:
    """Euclidean ball with ``center`` and nonnegative ``radius``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vector(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0:
            raise InvalidParam(f"ball radius must be >= 0, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, point, tol: float = DEFAULT_TOL) -> bool:
        p = _as_vector(point)
        return float(np.linalg.norm(p - self.center)) <= self.radius + tol


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``{x : lower <= x <= upper}`` (component-wise)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lower)
        up = _as_vector(self.upper)
        if lo.shape != up.shape:
            raise InvalidParam("box bounds must have equal dimension")
        if np.any(lo > up):
            raise InvalidParam(f"box lower bound exceeds upper: {lo} > {up}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, point, tol: float = DEFAULT_TOL) -> bool:
        p = _as_vector(point)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def translate(self, shift) -> "Box":
        s = _as_vector(shift)
        return Box(self.lower + s, self.upper + s)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


@dataclass(frozen=True)
class ConstraintSet:
    """A kept-inside box minus a list of kept-outside balls.

    Membership is box containment plus *strict* exteriority with respect to
    every exclusion ball (contact counts as violation).
    """

    region: Box
    exclusions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "exclusions", tuple(self.exclusions))

    def contains(self, point, tol: float = DEFAULT_TOL) -> bool:
        p = _as_vector(point)
        if not self.region.contains(p, tol):
            return False
        for b in self.exclusions:
            if float(np.linalg.norm(p - b.center)) <= b.radius - tol:
                return False
        return True

    def violation(self, point) -> float:
        """Worst-case penetration depth of ``point`` (0.0 when feasible)."""
        p = _as_vector(point)
        worst = max(
            float(np.max(self.region.lower - p, initial=0.0)),
            float(np.max(p - self.region.upper, initial=0.0)),
        )
        for b in self.exclusions:
            worst = max(worst, b.radius - float(np.linalg.norm(p - b.center)))
        return max(worst, 0.0)


def erode_box_by_ball(box: Box, r: float) -> Box:
    """Pontryagin difference box ``-`` ball: move each bound inward by ``r``."""
    if r < 0:
        raise InvalidParam(f"erosion radius must be >= 0, got {r}")
    lo = box.lower + r
    up = box.upper - r
    if np.any(lo > up):
        raise EmptySetError(f"box of widths {box.widths} eroded by {r} is empty")
    return Box(lo, up)


def ball_minkowski_ball(b1: Ball, b2: Ball) -> Ball:
    """Minkowski sum of two balls: add centers, add radii."""
    return Ball(b1.center + b2.center, b1.radius + b2.radius)


def scale_ball(m: float, b: Ball) -> Ball:
    """Image of a ball under the scalar map ``x -> m*x``."""
    return Ball(m * b.center, abs(m) * b.radius)


def inflate_ball(b: Ball, r: float) -> Ball:
    """Minkowski sum of a ball with the origin-centred ball of radius ``r``."""
    if r < 0:
        raise InvalidParam(f"inflation radius must be >= 0, got {r}")
    return Ball(b.center, b.radius + r)


def tighten_state_constraints(
    x_set: ConstraintSet, target_shift, tube_radius: float
) -> ConstraintSet:
    """Shift a constraint set into the error frame and tighten by the tube.

    The region is translated by ``-target_shift`` and eroded by
    ``tube_radius``; every exclusion ball is translated the same way and
    inflated by ``tube_radius``, so any point of the result plus any tube
    deviation plus the shift lands back in the original set.
    """
    if tube_radius < 0:
        raise InvalidParam(f"tube radius must be >= 0, got {tube_radius}")
    shift = _as_vector(target_shift)
    region = erode_box_by_ball(x_set.region.translate(-shift), tube_radius)
    exclusions = tuple(
        Ball(b.center - shift, b.radius + tube_radius) for b in x_set.exclusions
    )
    return ConstraintSet(region, exclusions)


def tighten_input_constraints(u_set, sigma: float, tube_radius: float):
    """Erode the input set by ``sigma * tube_radius`` (box or ball)."""
    if sigma <= 0:
        raise InvalidParam(f"sigma must be > 0, got {sigma}")
    if tube_radius < 0:
        raise InvalidParam(f"tube radius must be >= 0, got {tube_radius}")
    margin = sigma * tube_radius
    if isinstance(u_set, Box):
        return erode_box_by_ball(u_set, margin)
    if isinstance(u_set, Ball):
        radius = u_set.radius - margin
        if radius < 0:
            raise EmptySetError(
                f"input ball of radius {u_set.radius} eroded by {margin} is empty"
            )
        return Ball(u_set.center, radius)
    raise InvalidParam(f"input set must be Box or Ball, got {type(u_set)!r}")
