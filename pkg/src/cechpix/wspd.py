"""Well-separated pair decompositions, active intervals, and radius schedules.

Separation follows the convention diam(A), diam(B) <= delta * min-dist(A, B).
Active intervals [d(A,B)/8, 8 d(A,B)] are snapped outward to ladder scales;
the tilde variants [d/4, 4d] stay unsnapped and exist only as test oracles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import PointCloud
from .grid import ScaleLadder


@dataclass(frozen=True)
class WspdPair:
    set_a: tuple
    set_b: tuple
    rep_a: int
    rep_b: int
    distance: float
    lo_exp: int
    hi_exp: int

    @property
    def raw_interval(self):
        return (self.distance / 8.0, 8.0 * self.distance)

    def snapped_interval(self, ladder: ScaleLadder):
        return (ladder.value(self.lo_exp), ladder.value(self.hi_exp))


class _Node:
    __slots__ = ("idx", "lo", "hi", "diag", "children", "rep")

    def __init__(self, idx, coords):
        self.idx = idx
        pts = coords[idx]
        self.lo = pts.min(axis=0)
        self.hi = pts.max(axis=0)
        self.diag = float(np.linalg.norm(self.hi - self.lo))
        self.children = None
        self.rep = int(min(idx))


def _split(node, coords, cell_lo, cell_size):
    """Children of a compressed quadtree cell; single-point nodes are leaves."""
    if len(node.idx) <= 1:
        return []
    mid = cell_lo + cell_size / 2.0
    pts = coords[node.idx]
    codes = (pts >= mid).astype(int)
    weights = 1 << np.arange(coords.shape[1])
    cell_of = codes @ weights
    children = []
    for code in np.unique(cell_of):
        sub = np.asarray(node.idx)[cell_of == code]
        child_lo = cell_lo + (np.array([(code >> j) & 1 for j in range(coords.shape[1])]) * cell_size / 2.0)
        child = _Node(sub.tolist(), coords)
        # compress: descend through single-occupancy cells immediately
        size = cell_size / 2.0
        lo = child_lo
        while len(sub) > 1:
            m = lo + size / 2.0
            c = (coords[sub] >= m).astype(int) @ weights
            if len(np.unique(c)) > 1:
                break
            lo = lo + np.array([((int(c[0]) >> j) & 1) for j in range(coords.shape[1])]) * size / 2.0
            size = size / 2.0
        children.append((child, lo, size))
    return children


def _box_distance(a: _Node, b: _Node):
    gap = np.maximum(0.0, np.maximum(a.lo - b.hi, b.lo - a.hi))
    return float(np.linalg.norm(gap))


def _well_separated(a: _Node, b: _Node, delta):
    big = max(a.diag, b.diag)
    if big == 0.0:
        return True
    return big <= delta * _box_distance(a, b)


def build_wspd(P: PointCloud, delta, ladder: ScaleLadder) -> "ActiveSchedule":
    """delta-WSPD of P with lexicographically-smallest representatives."""
    if not (0.0 < delta <= 0.1):
        raise ValidationError("delta must lie in (0, 1/10]")
    if P.n < 1:
        raise ValidationError("at least one point required")
    coords = P.coords
    pairs = []
    if P.n >= 2:
        lo = coords.min(axis=0)
        size = float((coords.max(axis=0) - lo).max()) * (1.0 + 1e-9) + 1e-300
        root = _Node(list(range(P.n)), coords)
        stack = [(root, lo, size, root, lo, size)]
        cache = {}

        def children_of(node, cell_lo, cell_size):
            key = id(node)
            if key not in cache:
                cache[key] = _split(node, coords, cell_lo, cell_size)
            return cache[key]

        while stack:
            u, ulo, usz, v, vlo, vsz = stack.pop()
            if u is v:
                kids = children_of(u, ulo, usz)
                for i, (ci, cilo, cisz) in enumerate(kids):
                    stack.append((ci, cilo, cisz, ci, cilo, cisz))
                    for cj, cjlo, cjsz in kids[i + 1 :]:
                        stack.append((ci, cilo, cisz, cj, cjlo, cjsz))
                continue
            if _well_separated(u, v, delta):
                a, b = (u, v) if u.rep <= v.rep else (v, u)
                dist = float(np.linalg.norm(coords[a.rep] - coords[b.rep]))
                pairs.append(
                    WspdPair(
                        set_a=tuple(sorted(a.idx)),
                        set_b=tuple(sorted(b.idx)),
                        rep_a=a.rep,
                        rep_b=b.rep,
                        distance=dist,
                        lo_exp=ladder.floor_exponent(dist / 8.0),
                        hi_exp=ladder.ceil_exponent(8.0 * dist),
                    )
                )
                continue
            if u.diag >= v.diag:
                for c, clo, csz in children_of(u, ulo, usz):
                    stack.append((c, clo, csz, v, vlo, vsz))
            else:
                for c, clo, csz in children_of(v, vlo, vsz):
                    stack.append((u, ulo, usz, c, clo, csz))
    pairs.sort(key=lambda w: (w.rep_a, w.rep_b, w.lo_exp, w.hi_exp, w.set_a, w.set_b))
    return ActiveSchedule(pairs=pairs, delta=float(delta), ladder=ladder, n=P.n)


@dataclass
class ActiveSchedule:
    """WSPD pairs plus the per-point radius schedule they induce."""

    pairs: list
    delta: float
    ladder: ScaleLadder
    n: int
    _rep_ranges: dict = field(default_factory=dict, repr=False)
    _member_pairs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (0.0 < self.delta <= 0.1):
            raise ValidationError("delta must lie in (0, 1/10]")
        by_rep = {}
        for w in self.pairs:
            for rep in (w.rep_a, w.rep_b):
                by_rep.setdefault(rep, []).append((w.lo_exp, w.hi_exp))
            for p in itertools.chain(w.set_a, w.set_b):
                self._member_pairs.setdefault(p, []).append(w)
        for rep, ranges in by_rep.items():
            self._rep_ranges[rep] = _merge_ranges(ranges)

    def rep_exponent_ranges(self, p):
        return self._rep_ranges.get(p, [])

    def active_exponents(self, p):
        for lo, hi in self._rep_ranges.get(p, []):
            yield from range(lo, hi + 1)

    def is_active(self, p, exp) -> bool:
        return any(lo <= exp <= hi for lo, hi in self._rep_ranges.get(p, []))

    def active_points(self, exp):
        return sorted(p for p in self._rep_ranges if self.is_active(p, exp))

    def critical_exponents(self):
        exps = set()
        for ranges in self._rep_ranges.values():
            for lo, hi in ranges:
                exps.update(range(lo, hi + 1))
        return sorted(exps)

    def initial_exponent(self) -> int:
        """Exponent of the largest scale strictly below every snapped interval."""
        los = [w.lo_exp for w in self.pairs]
        if not los:
            return 0
        return min(los) - 1

    def dump_text(self) -> str:
        lines = [
            f"{w.rep_a} {w.rep_b} {w.distance!r} {w.lo_exp} {w.hi_exp}"
            for w in self.pairs
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def _merge_ranges(ranges):
    merged = []
    for lo, hi in sorted(ranges):
        if merged and lo <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def radius_function(schedule: ActiveSchedule, p, alpha) -> float:
    """Largest radius <= alpha reachable in p's snapped active intervals."""
    if alpha <= 0:
        raise ValidationError("scale must be positive")
    ladder = schedule.ladder
    best = 0.0
    for lo, hi in schedule.rep_exponent_ranges(p):
        lo_v, hi_v = ladder.value(lo), ladder.value(hi)
        if lo_v <= alpha <= hi_v:
            return float(alpha)
        if hi_v < alpha:
            best = max(best, hi_v)
    return best


def tilde_radius_function(schedule: ActiveSchedule, p, alpha) -> float:
    """Test oracle: like radius_function but every pair containing p also
    contributes the unsnapped interval [d/4, 4d]."""
    if alpha <= 0:
        raise ValidationError("scale must be positive")
    best = radius_function(schedule, p, alpha)
    if best == alpha:
        return float(alpha)
    for w in schedule._member_pairs.get(p, []):
        lo, hi = w.distance / 4.0, 4.0 * w.distance
        if lo <= alpha <= hi:
            return float(alpha)
        if hi < alpha:
            best = max(best, hi)
    return best


def critical_scales(schedule: ActiveSchedule, ladder: ScaleLadder = None):
    """Ladder scales covered by the union of snapped active intervals."""
    ladder = ladder or schedule.ladder
    return [ladder.value(k) for k in schedule.critical_exponents()]


def validate_wspd(schedule: ActiveSchedule, P: PointCloud) -> bool:
    """Exhaustive coverage + separation check (the oracle for build_wspd)."""
    coords = P.coords
    for w in schedule.pairs:
        if w.rep_a not in w.set_a or w.rep_b not in w.set_b:
            return False
        for side in (w.set_a, w.set_b):
            pts = coords[list(side)]
            diam = 0.0
            if len(side) > 1:
                d = pts[:, None, :] - pts[None, :, :]
                diam = float(np.sqrt((d * d).sum(axis=2)).max())
            da = coords[list(w.set_a)][:, None, :] - coords[list(w.set_b)][None, :, :]
            min_dist = float(np.sqrt((da * da).sum(axis=2)).min())
            if diam > schedule.delta * min_dist:
                return False
    covered = set()
    for w in schedule.pairs:
        for i in w.set_a:
            for j in w.set_b:
                covered.add((min(i, j), max(i, j)))
    want = {(i, j) for i in range(P.n) for j in range(i + 1, P.n)}
    return want <= covered
