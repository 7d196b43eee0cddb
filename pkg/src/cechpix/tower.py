"""Flag nerves of pixel sets and the simplicial tower token stream.

Token text format, one token per line:

    scale <decimal>
    add <v0> <v1> ... <vk>      (ascending vertex ids)
    contract <u> <v>

Within one scale the order is: vertex adds, then contractions, then
higher-simplex adds (dimension ascending, rows lexicographic).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rows
from .errors import (
    InternalInvariantError,
    MalformedStreamError,
    ValidationError,
)
from .geometry import PointCloud
from .grid import PixelId, ScaleLadder, level_for_scale
from .pixelsets import (
    FloodLog,
    PixelSet,
    lazy_advance,
    lazy_initialize,
    simple_pixel_set,
)
from .wspd import build_wspd


@dataclass(frozen=True)
class ScaleToken:
    value: float


@dataclass(frozen=True)
class AddToken:
    vertices: tuple

    @property
    def dim(self):
        return len(self.vertices) - 1


@dataclass(frozen=True)
class ContractToken:
    source: int
    target: int


class TowerTokenStream:
    def __init__(self, tokens=None):
        self.tokens = list(tokens or [])

    def append(self, token):
        self.tokens.append(token)

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def counts(self):
        scales = contracts = 0
        adds_by_dim = {}
        for t in self.tokens:
            if isinstance(t, ScaleToken):
                scales += 1
            elif isinstance(t, ContractToken):
                contracts += 1
            else:
                adds_by_dim[t.dim] = adds_by_dim.get(t.dim, 0) + 1
        return {"scales": scales, "adds_by_dim": adds_by_dim, "contracts": contracts}

    def to_text(self):
        return "".join(_token_line(t) for t in self.tokens)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.tokens:
                fh.write(_token_line(t))

    @classmethod
    def from_text(cls, text, source="<stream>"):
        tokens = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "scale" and len(parts) == 2:
                    tokens.append(ScaleToken(float(parts[1])))
                elif parts[0] == "add" and len(parts) >= 2:
                    verts = tuple(int(v) for v in parts[1:])
                    if list(verts) != sorted(set(verts)):
                        raise ValueError
                    tokens.append(AddToken(verts))
                elif parts[0] == "contract" and len(parts) == 3:
                    tokens.append(ContractToken(int(parts[1]), int(parts[2])))
                else:
                    raise ValueError
            except ValueError:
                raise ValidationError(f"{source}:{lineno}: malformed token line")
        return cls(tokens)

    @classmethod
    def read(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path))


def _token_line(t):
    if isinstance(t, ScaleToken):
        return f"scale {t.value!r}\n"
    if isinstance(t, AddToken):
        return "add " + " ".join(str(v) for v in t.vertices) + "\n"
    return f"contract {t.source} {t.target}\n"


_OFFSET_CACHE = {}


def _neighbor_offsets(dim, half=False):
    """3^d - 1 unit-cube offsets; half keeps one of each +/- pair."""
    key = (dim, half)
    if key not in _OFFSET_CACHE:
        offs = np.array(
            [o for o in itertools.product((-1, 0, 1), repeat=dim) if any(o)],
            dtype=np.int64,
        )
        if half:
            keep = []
            for o in offs:
                nz = o[np.nonzero(o)[0][0]]
                keep.append(nz > 0)
            offs = offs[np.asarray(keep, dtype=bool)]
        _OFFSET_CACHE[key] = offs
    return _OFFSET_CACHE[key]


def _same_level_edges(corners, labels, probe_idx=None, half=False):
    """Edges (label pairs) between intersecting same-level pixels.

    probe_idx restricts the probing side; with half=True each unordered pair
    is generated once (used for full-layer sweeps).
    """
    dim = corners.shape[1]
    if len(corners) == 0:
        return _rows.empty(2)
    probes = corners if probe_idx is None else corners[probe_idx]
    plabels = labels if probe_idx is None else labels[probe_idx]
    offs = _neighbor_offsets(dim, half=half)
    cand = probes[:, None, :] + offs[None, :, :]
    cand = cand.reshape(-1, dim)
    src = np.repeat(plabels, len(offs))
    mask = _rows.member_mask(cand, corners)
    if not mask.any():
        return _rows.empty(2)
    found = cand[mask]
    dst = labels[_rows.locate(found, corners)]
    pairs = np.stack([src[mask], dst], axis=1)
    pairs.sort(axis=1)
    return _rows.unique_rows(pairs)


def _cross_level_edges(low_corners, low_labels, low_level, high_corners, high_labels, high_level):
    """Edges between pixels at low_level and intersecting pixels at high_level.

    Closed-cube contact: candidates are the 3^d cells around each low pixel's
    ancestor, verified by exact interval overlap in low-level units.
    """
    dim = low_corners.shape[1]
    if len(low_corners) == 0 or len(high_corners) == 0:
        return _rows.empty(2)
    shift = high_level - low_level
    anc = low_corners >> shift
    offs = np.concatenate(
        [np.zeros((1, dim), dtype=np.int64), _neighbor_offsets(dim)], axis=0
    )
    cand = anc[:, None, :] + offs[None, :, :]
    cand_flat = cand.reshape(-1, dim)
    mask = _rows.member_mask(cand_flat, high_corners)
    if not mask.any():
        return _rows.empty(2)
    low_rep = np.repeat(np.arange(len(low_corners)), len(offs))[mask]
    hits = cand_flat[mask]
    # exact overlap in low-level units
    lo_h = hits << shift
    hi_h = (hits + 1) << shift
    c = low_corners[low_rep]
    ok = np.all((lo_h <= c + 1) & (c <= hi_h), axis=1)
    if not ok.any():
        return _rows.empty(2)
    pairs = np.stack(
        [low_labels[low_rep[ok]], high_labels[_rows.locate(hits[ok], high_corners)]],
        axis=1,
    )
    pairs.sort(axis=1)
    return _rows.unique_rows(pairs)


def nerve_one_skeleton(pixel_set: PixelSet):
    """All unordered pairs of distinct member pixels whose cubes intersect."""
    layers = {}
    label_to_pixel = {}
    next_label = 0
    for pid, xyz in sorted(pixel_set.points.items()):
        label_to_pixel[next_label] = PixelId.degenerate_point(pid, xyz)
        next_label += 1
    for lvl in sorted(pixel_set.levels):
        corners = pixel_set.levels[lvl]
        labels = np.arange(next_label, next_label + len(corners), dtype=np.int64)
        layers[lvl] = (corners, labels)
        for lab, c in zip(labels, corners):
            label_to_pixel[int(lab)] = PixelId.cube(lvl, c)
        next_label += len(corners)

    edge_rows = [_rows.empty(2)]
    lvls = sorted(layers)
    for i, lvl in enumerate(lvls):
        corners, labels = layers[lvl]
        edge_rows.append(_same_level_edges(corners, labels, half=True))
        for hl in lvls[i + 1 :]:
            hc, hlab = layers[hl]
            edge_rows.append(
                _cross_level_edges(corners, labels, lvl, hc, hlab, hl)
            )
    # degenerate pixels: contact means containment, so only non-maximal sets
    # can produce these edges, but the nerve is defined for them anyway
    from .pixelsets import _containing_corners

    deg_rows = []
    for lab in range(len(pixel_set.points)):
        pix = label_to_pixel[lab]
        for lvl in lvls:
            cands = _containing_corners(pix.point, lvl, pixel_set.ladder)
            m = _rows.member_mask(cands, layers[lvl][0])
            if m.any():
                for idx in _rows.locate(cands[m], layers[lvl][0]):
                    deg_rows.append((lab, int(layers[lvl][1][idx])))
    if deg_rows:
        rows = np.asarray(deg_rows, dtype=np.int64)
        rows.sort(axis=1)
        edge_rows.append(_rows.unique_rows(rows))
    edges = _rows.unique_rows(np.concatenate(edge_rows, axis=0))
    return [
        (label_to_pixel[int(a)], label_to_pixel[int(b)]) for a, b in edges
    ]


def flag_expand(edges, k, vertices=None):
    """All cliques of size <= k+1 in the edge graph, sorted lexicographically."""
    if k < 1:
        raise ValidationError("skeleton dimension must be at least 1")
    adj = {}
    verts = set(vertices or [])
    for a, b in edges:
        if a == b:
            raise ValidationError("self loops are not simplices")
        verts.add(a)
        verts.add(b)
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    out = [(v,) for v in sorted(verts)]

    def grow(clique, cands):
        for u in sorted(cands):
            ext = clique + (u,)
            out.append(ext)
            if len(ext) <= k:
                grow(ext, {w for w in cands & adj[u] if w > u})

    for v in sorted(verts):
        if v in adj:
            grow((v,), {u for u in adj[v] if u > v})
    out.sort(key=lambda s: (len(s), s))
    return out


class _Registry:
    """Live pixel <-> vertex-id table; ids are first-appearance, never reused."""

    def __init__(self, dim):
        self.dim = dim
        self.levels: dict[int, tuple] = {}  # level -> (corners sorted, vids)
        self.points: dict[int, int] = {}  # point id -> vid
        self.pixels: list[PixelId] = []  # vertex table by vid
        self.next_vid = 0

    def add_point_vertices(self, point_items):
        vids = []
        for pid, xyz in point_items:
            self.points[pid] = self.next_vid
            self.pixels.append(PixelId.degenerate_point(pid, xyz))
            vids.append(self.next_vid)
            self.next_vid += 1
        return vids

    def add_cubes(self, level, corners):
        """Register corner rows (lex-sorted) at level; returns vids in row order."""
        if len(corners) == 0:
            return np.empty(0, dtype=np.int64)
        new_vids = np.arange(
            self.next_vid, self.next_vid + len(corners), dtype=np.int64
        )
        self.next_vid += len(corners)
        for c in corners:
            self.pixels.append(PixelId.cube(level, c))
        old_c, old_v = self.levels.get(level, (_rows.empty(self.dim), np.empty(0, dtype=np.int64)))
        merged = np.concatenate([old_c, corners], axis=0)
        merged_v = np.concatenate([old_v, new_vids])
        order = np.argsort(_rows._as_struct(merged), kind="stable")
        self.levels[level] = (merged[order], merged_v[order])
        return new_vids

    def vid_of(self, pix: PixelId):
        if pix.is_degenerate:
            return self.points[pix.point_id]
        corners, vids = self.levels[pix.level]
        idx = _rows.locate(np.asarray([pix.corner], dtype=np.int64), corners)
        return int(vids[idx[0]])

    def remove_pixels(self, pixels):
        drop_points = [p.point_id for p in pixels if p.is_degenerate]
        for pid in drop_points:
            del self.points[pid]
        by_level = {}
        for p in pixels:
            if not p.is_degenerate:
                by_level.setdefault(p.level, []).append(p.corner)
        for lvl, corners in by_level.items():
            rows = np.asarray(corners, dtype=np.int64)
            cur_c, cur_v = self.levels[lvl]
            mask = _rows.member_mask(cur_c, _rows.unique_rows(rows))
            self.levels[lvl] = (cur_c[~mask], cur_v[~mask])
            if len(self.levels[lvl][0]) == 0:
                del self.levels[lvl]

    def live_vid_count(self):
        return len(self.points) + sum(len(v) for _, v in self.levels.values())


@dataclass
class TowerStats:
    mode: str
    epsilon_user: float
    epsilon: float
    k: int
    dim: int
    n_points: int
    scale_values: list = field(default_factory=list)
    pixels_per_scale: list = field(default_factory=list)
    adds_per_scale: list = field(default_factory=list)
    contracts_per_scale: list = field(default_factory=list)
    adds_by_dim: dict = field(default_factory=dict)
    n_contract_tokens: int = 0
    flood_log: FloodLog = field(default_factory=FloodLog)

    @property
    def n_scale_tokens(self):
        return len(self.scale_values)

    @property
    def n_add_tokens(self):
        return sum(self.adds_by_dim.values())

    @property
    def total_tokens(self):
        return self.n_scale_tokens + self.n_add_tokens + self.n_contract_tokens


@dataclass
class TowerResult:
    stream: TowerTokenStream
    stats: TowerStats
    ladder: ScaleLadder
    mode: str
    k: int
    schedule: object = None
    vertex_pixels: list = None
    scale_exponents: list = None


class _Builder:
    def __init__(self, P, epsilon_user, k, mode, ladder, collect, sink):
        self.P = P
        self.k = k
        self.mode = mode
        self.ladder = ladder
        self.collect = collect
        self.sink = sink
        self.registry = _Registry(P.dim)
        self.K = {0: _rows.empty(1)}  # live complex rows per dimension
        self.stream = TowerTokenStream() if collect else None
        self.stats = TowerStats(
            mode=mode,
            epsilon_user=epsilon_user,
            epsilon=ladder.epsilon,
            k=k,
            dim=P.dim,
            n_points=P.n,
        )

    def emit(self, token):
        if self.collect:
            self.stream.append(token)
        if self.sink is not None:
            self.sink(token)

    # ---- per-scale machinery -------------------------------------------

    def process_scale(self, value, level, added_corners, contract_pairs):
        """One tower step: vertex adds, contractions, then higher-simplex adds."""
        self.emit(ScaleToken(value))
        self.stats.scale_values.append(value)

        new_vids = self.registry.add_cubes(level, added_corners)
        for v in new_vids:
            self.emit(AddToken((int(v),)))
        self.stats.adds_by_dim[0] = self.stats.adds_by_dim.get(0, 0) + len(new_vids)

        contracted_vids = []
        vmap_pairs = []
        for old_pix, cover_pix in contract_pairs:
            u = self.registry.vid_of(old_pix)
            v = self.registry.vid_of(cover_pix)
            self.emit(ContractToken(u, v))
            contracted_vids.append(u)
            vmap_pairs.append((u, v))
        self.registry.remove_pixels([p for p, _ in contract_pairs])
        self.stats.n_contract_tokens += len(contracted_vids)
        self.stats.contracts_per_scale.append(len(contracted_vids))

        # live complex update: drop and remap rows touching contracted vids
        if contracted_vids:
            vmap = np.arange(self.registry.next_vid, dtype=np.int64)
            for u, v in vmap_pairs:
                vmap[u] = v
            contracted_arr = np.asarray(sorted(contracted_vids), dtype=np.int64)
            images = {}
            for dim_c, rows in list(self.K.items()):
                if len(rows) == 0:
                    continue
                touched = np.isin(rows, contracted_arr).any(axis=1)
                if not touched.any():
                    continue
                kept = rows[~touched]
                mapped = vmap[rows[touched]]
                mapped.sort(axis=1)
                self.K[dim_c] = kept
                for drow in _split_by_distinct(mapped):
                    images.setdefault(drow.shape[1] - 1, []).append(drow)
            for dim_c, parts in images.items():
                base = self.K.get(dim_c, _rows.empty(dim_c + 1))
                self.K[dim_c] = _rows.union(base, np.concatenate(parts, axis=0))

        # new simplices all touch a new vertex
        self.K[0] = _rows.union(self.K[0], new_vids.reshape(-1, 1))
        n_adds_high = 0
        if self.k >= 1 and len(new_vids):
            n_adds_high = self._emit_new_simplices(level, added_corners, new_vids)
        self.stats.adds_per_scale.append(len(new_vids) + n_adds_high)
        self.stats.pixels_per_scale.append(self.registry.live_vid_count())

    def _emit_new_simplices(self, level, added_corners, new_vids):
        reg = self.registry
        cur_c, cur_v = reg.levels[level]
        probe_idx = _rows.locate(added_corners, cur_c)
        edge_parts = [_same_level_edges(cur_c, cur_v, probe_idx=probe_idx)]
        for lvl in sorted(reg.levels):
            if lvl >= level:
                continue
            lc, lv = reg.levels[lvl]
            # older smaller pixels versus the newly added larger ones
            add_vids = cur_v[probe_idx]
            order = np.argsort(_rows._as_struct(added_corners), kind="stable")
            edge_parts.append(
                _cross_level_edges(lc, lv, lvl, added_corners[order], add_vids[order], level)
            )
        cand_edges = _rows.unique_rows(np.concatenate(edge_parts, axis=0))

        existing = self.K.get(1, _rows.empty(2))
        new_edges = _rows.difference(cand_edges, existing)

        adds_total = 0
        new_by_dim = {1: new_edges}
        if self.k >= 2 and (len(new_edges) or len(cand_edges)):
            new_by_dim.update(
                self._expand_new_cliques(new_vids, cand_edges, existing)
            )
        for dim_c in sorted(new_by_dim):
            rows = new_by_dim[dim_c]
            if len(rows) == 0:
                continue
            base = self.K.get(dim_c, _rows.empty(dim_c + 1))
            fresh = _rows.difference(rows, base)
            fresh = _rows.sort_rows(fresh)
            for row in fresh:
                self.emit(AddToken(tuple(int(x) for x in row)))
            adds_total += len(fresh)
            self.stats.adds_by_dim[dim_c] = (
                self.stats.adds_by_dim.get(dim_c, 0) + len(fresh)
            )
            self.K[dim_c] = _rows.union(base, fresh)
        return adds_total

    def _expand_new_cliques(self, new_vids, cand_edges, old_edges):
        """Cliques of size 3..k+1 containing a new vertex, via neighbor intersects."""
        new_set = set(int(v) for v in new_vids)
        local_vids = set(new_set)
        for a, b in cand_edges:
            local_vids.add(int(a))
            local_vids.add(int(b))
        if len(old_edges):
            local_arr = np.asarray(sorted(local_vids), dtype=np.int64)
            touch = np.isin(old_edges, local_arr).all(axis=1)
            rel_old = old_edges[touch]
        else:
            rel_old = _rows.empty(2)
        adj = {}
        for rows in (cand_edges, rel_old):
            for a, b in rows:
                adj.setdefault(int(a), set()).add(int(b))
                adj.setdefault(int(b), set()).add(int(a))
        adj = {v: np.asarray(sorted(ns), dtype=np.int64) for v, ns in adj.items()}

        found = {d: [] for d in range(2, self.k + 1)}

        def grow(clique, cands, has_new):
            dim_c = len(clique)  # next simplex dim if extended
            for u in cands:
                u = int(u)
                ext = clique + (u,)
                ext_new = has_new or u in new_set
                if ext_new and len(ext) >= 3:
                    found[len(ext) - 1].append(ext)
                if len(ext) <= self.k:
                    nxt = np.intersect1d(cands, adj.get(u, ()), assume_unique=False)
                    nxt = nxt[nxt > u]
                    if len(nxt):
                        grow(ext, nxt, ext_new)

        for v in sorted(adj):
            ns = adj[v]
            grow((v,), ns[ns > v], v in new_set)
        out = {}
        for dim_c, rows in found.items():
            if rows:
                out[dim_c] = _rows.unique_rows(np.asarray(rows, dtype=np.int64))
        return out


def _split_by_distinct(mapped_rows):
    """Split mapped simplex rows by their count of distinct vertices.

    Rows come in sorted along axis 1; a repeated vertex means the image
    simplex dropped dimension.
    """
    out = []
    if len(mapped_rows) == 0:
        return out
    width = mapped_rows.shape[1]
    distinct = np.ones(len(mapped_rows), dtype=np.int64)
    for j in range(1, width):
        distinct += (mapped_rows[:, j] != mapped_rows[:, j - 1]).astype(np.int64)
    for m in np.unique(distinct):
        rows = mapped_rows[distinct == m]
        if m == width:
            out.append(rows)
            continue
        dedup = np.empty((len(rows), int(m)), dtype=np.int64)
        for i, row in enumerate(rows):
            seen = sorted(set(int(x) for x in row))
            dedup[i] = seen
        out.append(_rows.unique_rows(dedup))
    return out


def build_tower(
    P: PointCloud,
    epsilon_user,
    k,
    mode,
    *,
    alpha_range=None,
    collect=True,
    sink=None,
) -> TowerResult:
    """Construct the approximation tower for P as a token stream.

    The internal grid resolution is epsilon_user/4 (simple-mode guarantee
    (1+eps/4)^2 < 1+eps, lazy-mode (1+eps/4)^3 < 1+eps with an eps/8-WSPD).
    Simple mode walks every ladder scale in [min-distance/3, diameter] (or
    alpha_range); lazy mode walks exactly the critical scales of the WSPD.
    """
    if mode not in ("simple", "lazy"):
        raise ValidationError("mode must be 'simple' or 'lazy'")
    if not (0.0 < epsilon_user <= 1.0):
        raise ValidationError("epsilon must lie in (0, 1]")
    epsilon = epsilon_user / 4.0
    if epsilon > 0.2:
        raise ValidationError(
            "internal resolution epsilon/4 must not exceed 1/5 (epsilon <= 0.8)"
        )
    if k < 0:
        raise ValidationError("skeleton dimension must be nonnegative")
    ladder = ScaleLadder(epsilon)
    builder = _Builder(P, epsilon_user, k, mode, ladder, collect, sink)

    if mode == "simple":
        exponents = _simple_exponents(P, ladder, alpha_range)
        _run_simple(builder, exponents)
        schedule = None
    else:
        schedule = build_wspd(P, epsilon / 8.0, ladder)
        exponents = _run_lazy(builder, schedule)

    return TowerResult(
        stream=builder.stream,
        stats=builder.stats,
        ladder=ladder,
        mode=mode,
        k=k,
        schedule=schedule,
        vertex_pixels=builder.registry.pixels,
        scale_exponents=exponents,
    )


def _simple_exponents(P, ladder, alpha_range):
    if alpha_range is not None:
        lo, hi = alpha_range
        if not (0 < lo <= hi):
            raise ValidationError("alpha range must satisfy 0 < min <= max")
    elif P.n == 1:
        return [0]
    else:
        lo = P.min_distance() / 3.0
        hi = P.diameter()
    k_lo = ladder.ceil_exponent(lo)
    k_hi = ladder.floor_exponent(hi)
    if k_hi < k_lo:
        raise ValidationError("empty scale range")
    return list(range(k_lo, k_hi + 1))


def _run_simple(builder, exponents):
    P, ladder = builder.P, builder.ladder
    prev_level = None
    prev_set = None
    for exp in exponents:
        value = ladder.value(exp)
        level = level_for_scale(value)
        cur = simple_pixel_set(P, value, ladder, flood_log=builder.stats.flood_log)
        corners = cur.levels.get(level, _rows.empty(P.dim))
        if prev_set is None:
            added = corners
            contracts = []
        elif level == prev_level:
            if len(_rows.difference(prev_set, corners)):
                raise InternalInvariantError(
                    "simple-mode pixel sets must be nested between grid changes"
                )
            added = _rows.difference(corners, prev_set)
            contracts = []
        else:
            if level != prev_level + 1:
                raise InternalInvariantError("grid level may only double per step")
            parents = prev_set >> 1
            if np.any(~_rows.member_mask(parents, corners)):
                raise InternalInvariantError(
                    "parent pixel missing from the next simple-mode set"
                )
            added = corners
            contracts = [
                (PixelId.cube(prev_level, c), PixelId.cube(level, p))
                for c, p in zip(prev_set, parents)
            ]
            contracts.sort(key=lambda pair: pair[0].sort_key())
        builder.process_scale(value, level, added, contracts)
        prev_level = level
        prev_set = corners


def _run_lazy(builder, schedule):
    P, ladder = builder.P, builder.ladder
    state = lazy_initialize(P, schedule)
    exp0 = state.scale_exp
    builder.emit(ScaleToken(ladder.value(exp0)))
    builder.stats.scale_values.append(ladder.value(exp0))
    vids = builder.registry.add_point_vertices(sorted(state.points.items()))
    for v in vids:
        builder.emit(AddToken((int(v),)))
    builder.stats.adds_by_dim[0] = builder.stats.adds_by_dim.get(0, 0) + len(vids)
    builder.K[0] = _rows.union(
        builder.K[0], np.asarray(vids, dtype=np.int64).reshape(-1, 1)
    )
    builder.stats.adds_per_scale.append(len(vids))
    builder.stats.contracts_per_scale.append(0)
    builder.stats.pixels_per_scale.append(len(vids))

    exponents = [exp0]
    for exp in schedule.critical_exponents():
        state, delta = lazy_advance(
            state, exp, schedule, P, flood_log=builder.stats.flood_log
        )
        builder.process_scale(
            ladder.value(exp),
            delta.level,
            delta.added_corners,
            delta.contracted,
        )
        exponents.append(exp)
    return exponents


def replay(stream):
    """Replay a token stream; yields (scale_value, live complex) per scale.

    The live complex is a set of vertex-id tuples. Raises
    MalformedStreamError (with the token index) on rule violations.
    """
    live = set()
    vertices = set()
    dead = set()
    cur_scale = None
    pending = False

    def snapshot():
        return cur_scale, frozenset(live)

    for idx, tok in enumerate(stream):
        if isinstance(tok, ScaleToken):
            if cur_scale is not None:
                if tok.value <= cur_scale:
                    raise MalformedStreamError(idx, "scales must strictly increase")
                yield snapshot()
            cur_scale = tok.value
            pending = True
        elif isinstance(tok, AddToken):
            simplex = tok.vertices
            if len(simplex) == 1:
                v = simplex[0]
                if v in vertices or v in dead:
                    raise MalformedStreamError(idx, f"vertex {v} already used")
                vertices.add(v)
                live.add(simplex)
            else:
                if simplex in live:
                    raise MalformedStreamError(idx, "simplex already present")
                for f in itertools.combinations(simplex, len(simplex) - 1):
                    if f not in live:
                        raise MalformedStreamError(idx, f"missing face {f}")
                live.add(simplex)
        else:
            u, v = tok.source, tok.target
            if (u,) not in live or (v,) not in live or u == v:
                raise MalformedStreamError(idx, f"bad contraction {u}->{v}")
            renamed = set()
            removed = set()
            for simplex in live:
                if u in simplex:
                    removed.add(simplex)
                    renamed.add(
                        tuple(sorted(set(v if x == u else x for x in simplex)))
                    )
            live -= removed
            live |= renamed
            vertices.discard(u)
            dead.add(u)
    if pending:
        yield snapshot()
