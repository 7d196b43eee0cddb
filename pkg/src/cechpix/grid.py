"""Scale ladders, dyadic pixel lattices, and the ball-flooding pixelizer.

Pixels are closed cubes of the lattice (eps * 2^level / (4 sqrt(d))) * Z^d.
Identity uses the half-open floor convention; geometry stays closed, so
face/edge/corner contact counts as intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InternalInvariantError, ValidationError


class ScaleLadder:
    """The multiplicative scale ladder (1+eps)^k and the dyadic ladder 2^i.

    Scales are handled as integer exponents wherever identity matters; real
    values are materialized only for geometry.
    """

    def __init__(self, epsilon):
        epsilon = float(epsilon)
        if not (0.0 < epsilon <= 0.2):
            raise ValidationError("epsilon must lie in (0, 1/5]")
        self.epsilon = epsilon
        self._log1p = math.log1p(epsilon)

    def value(self, k: int) -> float:
        return (1.0 + self.epsilon) ** k

    def floor_exponent(self, x) -> int:
        """Largest k with (1+eps)^k <= x."""
        if x <= 0:
            raise ValidationError("scale must be positive")
        k = math.floor(math.log(x) / self._log1p)
        while self.value(k) > x:
            k -= 1
        while self.value(k + 1) <= x:
            k += 1
        return k

    def ceil_exponent(self, x) -> int:
        """Smallest k with (1+eps)^k >= x."""
        k = self.floor_exponent(x)
        return k if self.value(k) == x else k + 1

    def side(self, level: int, dim: int) -> float:
        return self.epsilon * (2.0**level) / (4.0 * math.sqrt(dim))

    def __repr__(self):
        return f"ScaleLadder(epsilon={self.epsilon})"


def level_for_scale(alpha) -> int:
    """The i with 2^i <= alpha < 2^(i+1); exact at dyadic boundaries."""
    if alpha <= 0:
        raise ValidationError("scale must be positive")
    _, e = math.frexp(alpha)
    return e - 1


@dataclass(frozen=True)
class PixelId:
    """One closed cube of a dyadic lattice, or a degenerate point-pixel."""

    level: int
    corner: Optional[tuple] = None
    point_id: Optional[int] = None
    point: Optional[tuple] = None

    @classmethod
    def cube(cls, level, corner):
        return cls(level=int(level), corner=tuple(int(c) for c in corner))

    @classmethod
    def degenerate_point(cls, point_id, point):
        return cls(
            level=0,
            corner=None,
            point_id=int(point_id),
            point=tuple(float(x) for x in point),
        )

    @property
    def is_degenerate(self):
        return self.corner is None

    @property
    def dim(self):
        return len(self.point) if self.is_degenerate else len(self.corner)

    def sort_key(self):
        # degenerate point-pixels order before cubes, by point id
        if self.is_degenerate:
            return (0, self.point_id, ())
        return (1, self.level, self.corner)

    def bounds(self, ladder: ScaleLadder):
        """Closed cube bounds as (lo, hi) arrays; degenerate pixels collapse."""
        if self.is_degenerate:
            p = np.asarray(self.point, dtype=float)
            return p, p.copy()
        s = ladder.side(self.level, self.dim)
        c = np.asarray(self.corner, dtype=float)
        return c * s, (c + 1.0) * s

    def center(self, ladder: ScaleLadder):
        if self.is_degenerate:
            return np.asarray(self.point, dtype=float)
        s = ladder.side(self.level, self.dim)
        return (np.asarray(self.corner, dtype=float) + 0.5) * s


def pixel_containing(x, level, ladder: ScaleLadder) -> PixelId:
    """Pixel whose half-open cube owns x (coordinatewise floor of x/side)."""
    x = np.asarray(x, dtype=float)
    s = ladder.side(level, len(x))
    corner = np.floor(x / s).astype(np.int64)
    return PixelId.cube(level, corner)


def parent_pixel(a: PixelId, target_level, ladder: ScaleLadder = None) -> PixelId:
    """Unique pixel at target_level whose cube contains a's cube."""
    target_level = int(target_level)
    if a.is_degenerate:
        if ladder is None:
            raise ValidationError("degenerate pixels need a ladder to locate parents")
        return pixel_containing(a.point, target_level, ladder)
    if target_level < a.level:
        raise ValidationError("target level must not be below the pixel level")
    if target_level == a.level:
        return a
    shift = target_level - a.level
    corner = tuple(int(c) >> shift for c in a.corner)
    return PixelId.cube(target_level, corner)


def pixels_intersect(a: PixelId, b: PixelId, ladder: ScaleLadder = None) -> bool:
    """Closed-cube overlap; exact integer arithmetic for cube/cube pairs."""
    if a.dim != b.dim:
        raise ValidationError("pixels must share one ambient dimension")
    if a.is_degenerate and b.is_degenerate:
        return a.point_id == b.point_id or a.point == b.point
    if a.is_degenerate or b.is_degenerate:
        if ladder is None:
            raise ValidationError("degenerate pixels need a ladder for geometry")
        pt, cube = (a, b) if a.is_degenerate else (b, a)
        lo, hi = cube.bounds(ladder)
        x = np.asarray(pt.point, dtype=float)
        return bool(np.all(lo <= x) and np.all(x <= hi))
    base = min(a.level, b.level)
    sa, sb = a.level - base, b.level - base
    for ca, cb in zip(a.corner, b.corner):
        a_lo, a_hi = ca << sa, (ca + 1) << sa
        b_lo, b_hi = cb << sb, (cb + 1) << sb
        if a_lo > b_hi or b_lo > a_hi:
            return False
    return True


def _ring_offsets(ell: int, dim: int):
    """Integer offsets at Chebyshev distance exactly ell, as an (m, dim) array."""
    if ell == 0:
        return np.zeros((1, dim), dtype=np.int64)
    blocks = []
    full = np.arange(-ell, ell + 1, dtype=np.int64)
    inner = np.arange(-(ell - 1), ell, dtype=np.int64)
    for axis in range(dim):
        for sign in (-ell, ell):
            axes = []
            for j in range(dim):
                if j < axis:
                    axes.append(full)
                elif j == axis:
                    axes.append(np.array([sign], dtype=np.int64))
                else:
                    axes.append(inner)
            grid = np.meshgrid(*axes, indexing="ij")
            blocks.append(np.stack([g.ravel() for g in grid], axis=1))
    return np.concatenate(blocks, axis=0)


def flood_corners(p, level, select_radius, ladder: ScaleLadder):
    """Corners of all pixels at `level` whose center is within select_radius
    of p, found by breadth-first rings from the pixel containing p.

    Rings stop expanding once no center lies within select_radius + eps*2^level
    (the enlarged search ball); selection itself uses select_radius.
    """
    p = np.asarray(p, dtype=float)
    dim = len(p)
    s = ladder.side(level, dim)
    enqueue_radius = select_radius + ladder.epsilon * (2.0**level)
    c0 = np.floor(p / s).astype(np.int64)
    found = []
    ell = 0
    while True:
        ring = c0[None, :] + _ring_offsets(ell, dim)
        centers = (ring.astype(float) + 0.5) * s
        dist = np.sqrt(((centers - p) ** 2).sum(axis=1))
        hit = dist <= select_radius
        if np.any(hit):
            found.append(ring[hit])
        if ell > 0 and not np.any(dist <= enqueue_radius):
            break
        ell += 1
    if not found:
        return np.empty((0, dim), dtype=np.int64)
    corners = np.concatenate(found, axis=0)
    # runaway guard: the count can never exceed the per-axis center budget
    limit = (2.0 * select_radius / s + 2.0) ** dim
    if len(corners) > limit:
        raise InternalInvariantError(
            f"flood produced {len(corners)} pixels, above the {limit:.0f} budget"
        )
    return corners


def flood_ball_pixels(p, r, level, select_radius, ladder: ScaleLadder):
    """Spec-facing flood: sorted list of PixelId at `level` with centers
    within select_radius of p (select_radius >= r, the ball radius)."""
    if r <= 0:
        raise ValidationError("ball radius must be positive")
    if select_radius < r:
        raise ValidationError("select_radius must be at least the ball radius")
    corners = flood_corners(p, level, select_radius, ladder)
    corners = corners[np.lexsort(corners.T[::-1])]
    return [PixelId.cube(level, c) for c in corners]


def packing_bound(dim: int, epsilon: float) -> float:
    """Per-ball pixel budget from the packing argument: (16 sqrt(d)/eps)^d."""
    return (16.0 * math.sqrt(dim) / epsilon) ** dim
