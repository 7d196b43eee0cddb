"""Pixel-set evolution: simple-mode sets at a single grid level and lazy-mode
sets of mixed levels with inclusion-maximality and coverage contractions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rows
from .errors import InternalInvariantError, ValidationError
from .geometry import PointCloud
from .grid import (
    PixelId,
    ScaleLadder,
    flood_corners,
    level_for_scale,
    packing_bound,
    pixels_intersect,
)


@dataclass
class FloodLog:
    """Running record of per-ball flood sizes against the packing budget."""

    n_floods: int = 0
    max_count: int = 0
    max_bound_ratio: float = 0.0

    def record(self, count, dim, epsilon):
        self.n_floods += 1
        self.max_count = max(self.max_count, int(count))
        ratio = count / packing_bound(dim, epsilon)
        self.max_bound_ratio = max(self.max_bound_ratio, float(ratio))


class PixelSet:
    """Inclusion-maximal set of pixels, possibly across lattice levels,
    plus degenerate point-pixels (lazy mode before first sampling)."""

    def __init__(self, dim, ladder: ScaleLadder, scale_exp=None):
        self.dim = int(dim)
        self.ladder = ladder
        self.scale_exp = scale_exp
        self.levels: dict[int, np.ndarray] = {}
        self.points: dict[int, tuple] = {}

    @property
    def scale(self):
        return None if self.scale_exp is None else self.ladder.value(self.scale_exp)

    def __len__(self):
        return sum(len(c) for c in self.levels.values()) + len(self.points)

    def copy(self):
        out = PixelSet(self.dim, self.ladder, self.scale_exp)
        out.levels = {lvl: c.copy() for lvl, c in self.levels.items()}
        out.points = dict(self.points)
        return out

    def members(self):
        """All pixels, degenerate point-pixels first, then cubes by (level, corner)."""
        out = [
            PixelId.degenerate_point(pid, xyz)
            for pid, xyz in sorted(self.points.items())
        ]
        for lvl in sorted(self.levels):
            out.extend(PixelId.cube(lvl, c) for c in self.levels[lvl])
        return out

    def contains(self, pix: PixelId) -> bool:
        if pix.is_degenerate:
            return pix.point_id in self.points
        layer = self.levels.get(pix.level)
        if layer is None or len(layer) == 0:
            return False
        row = np.asarray([pix.corner], dtype=np.int64)
        return bool(_rows.member_mask(row, layer)[0])

    def is_inclusion_maximal(self) -> bool:
        pix = self.members()
        for i, a in enumerate(pix):
            lo_a, hi_a = a.bounds(self.ladder)
            for j, b in enumerate(pix):
                if i == j or b.is_degenerate:
                    continue
                # strict containment needs b's cube larger than a's
                if not a.is_degenerate and b.level <= a.level:
                    continue
                lo_b, hi_b = b.bounds(self.ladder)
                if np.all(lo_b <= lo_a) and np.all(hi_a <= hi_b):
                    return False
        return True


def _containing_corners(x, level, ladder):
    """Corners of the closed cubes at `level` containing point x (<= 2^d rows)."""
    x = np.asarray(x, dtype=float)
    s = ladder.side(level, len(x))
    base = np.floor(x / s).astype(np.int64)
    choices = []
    for j in range(len(x)):
        if x[j] == base[j] * s:
            choices.append((base[j] - 1, base[j]))
        else:
            choices.append((base[j],))
    rows = np.array(np.meshgrid(*choices, indexing="ij")).reshape(len(x), -1).T
    return np.ascontiguousarray(rows, dtype=np.int64)


def simple_pixel_set(
    P: PointCloud, alpha, ladder: ScaleLadder, flood_log: FloodLog = None
) -> PixelSet:
    """All pixels of the alpha-grid whose center lies within alpha of P."""
    if alpha <= 0:
        raise ValidationError("scale must be positive")
    level = level_for_scale(alpha)
    out = PixelSet(P.dim, ladder, None)
    if P.n == 0:
        return out
    parts = []
    for x in P.coords:
        c = flood_corners(x, level, alpha, ladder)
        if flood_log is not None:
            flood_log.record(len(c), P.dim, ladder.epsilon)
        parts.append(c)
    corners = _rows.unique_rows(np.concatenate(parts, axis=0))
    if len(corners):
        out.levels[level] = corners
    return out


def lazy_initialize(P: PointCloud, schedule) -> PixelSet:
    """Initial lazy state: one degenerate point-pixel per input point."""
    if P.n < 1:
        raise ValidationError("at least one point required")
    out = PixelSet(P.dim, schedule.ladder, schedule.initial_exponent())
    out.points = {i: tuple(map(float, P.coords[i])) for i in range(P.n)}
    return out


@dataclass
class AdvanceDelta:
    """What changed in one lazy advance step."""

    level: int
    added_corners: np.ndarray
    contracted: list = field(default_factory=list)  # (old PixelId, coverer PixelId)

    @property
    def added(self):
        return [PixelId.cube(self.level, c) for c in self.added_corners]

    @property
    def is_empty(self):
        return len(self.added_corners) == 0 and not self.contracted


def lazy_advance(
    prev: PixelSet,
    alpha_exp: int,
    schedule,
    P: PointCloud,
    flood_log: FloodLog = None,
):
    """Advance the lazy pixel set to the ladder scale with exponent alpha_exp.

    Floods the (1+eps/2)-enlarged balls of every active point at the current
    grid level, merges, and contracts every covered older pixel (including
    degenerate point-pixels) into its coverer.
    """
    ladder = prev.ladder
    if prev.scale_exp is not None and alpha_exp <= prev.scale_exp:
        raise ValidationError("advance requires a strictly larger scale")
    alpha = ladder.value(alpha_exp)
    level = level_for_scale(alpha)
    eps = ladder.epsilon

    active = [p for p in schedule.active_points(alpha_exp)]
    parts = []
    for p in active:
        select = (1.0 + eps / 2.0) * alpha  # r_p(alpha) == alpha for active p
        c = flood_corners(P.coords[p], level, select, ladder)
        if flood_log is not None:
            flood_log.record(len(c), P.dim, eps)
        parts.append(c)

    out = PixelSet(prev.dim, ladder, alpha_exp)
    delta = AdvanceDelta(level=level, added_corners=_rows.empty(prev.dim))
    if not parts:
        out.levels = {lvl: c.copy() for lvl, c in prev.levels.items()}
        out.points = dict(prev.points)
        return out, delta

    flooded = _rows.unique_rows(np.concatenate(parts, axis=0))
    existing = prev.levels.get(level, _rows.empty(prev.dim))
    added = _rows.difference(flooded, existing)
    delta.added_corners = added

    contracted = []
    for lvl in sorted(prev.levels):
        if lvl == level:
            continue
        if lvl > level:
            raise InternalInvariantError("pixel levels must be nondecreasing over scales")
        corners = prev.levels[lvl]
        anc = corners >> (level - lvl)
        mask = _rows.member_mask(anc, added)
        kept = corners[~mask]
        for row, cover in zip(corners[mask], anc[mask]):
            contracted.append((PixelId.cube(lvl, row), PixelId.cube(level, cover)))
        if len(kept):
            out.levels[lvl] = kept
    for pid in sorted(prev.points):
        xyz = prev.points[pid]
        cands = _containing_corners(xyz, level, ladder)
        mask = _rows.member_mask(cands, added)
        if mask.any():
            cover = _rows.sort_rows(cands[mask])[0]
            contracted.append(
                (
                    PixelId.degenerate_point(pid, xyz),
                    PixelId.cube(level, cover),
                )
            )
        else:
            out.points[pid] = xyz

    out.levels[level] = _rows.union(existing, added)
    contracted.sort(key=lambda pair: pair[0].sort_key())
    delta.contracted = contracted
    return out, delta


def covering_pixel(pixel_set: PixelSet, a: PixelId):
    """The member whose cube strictly contains a's cube, if any."""
    if a.is_degenerate:
        for lvl in sorted(pixel_set.levels):
            cands = _containing_corners(a.point, lvl, pixel_set.ladder)
            mask = _rows.member_mask(cands, pixel_set.levels[lvl])
            if mask.any():
                return PixelId.cube(lvl, _rows.sort_rows(cands[mask])[0])
        return None
    for lvl in sorted(pixel_set.levels):
        if lvl <= a.level:
            continue
        anc = np.asarray([[c >> (lvl - a.level) for c in a.corner]], dtype=np.int64)
        if _rows.member_mask(anc, pixel_set.levels[lvl])[0]:
            return PixelId.cube(lvl, anc[0])
    return None
