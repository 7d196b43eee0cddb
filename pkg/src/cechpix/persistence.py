"""Tower-to-filtration conversion (coning of contractions) and persistence
diagrams over the two-element field."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedStreamError, ValidationError
from .oracle import FilteredComplex
from .tower import AddToken, ContractToken, ScaleToken

try:  # the reduction hot loop is jitted; plain Python fallback keeps parity
    import numba
    from numba.typed import List as _NumbaList

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False


@dataclass
class PersistenceDiagram:
    """Multiset of (dimension, birth, death); death may be math.inf."""

    points: list

    def __post_init__(self):
        self.points = sorted(
            (int(d), float(b), float(x)) for d, b, x in self.points
        )

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return isinstance(other, PersistenceDiagram) and self.points == other.points

    def in_dimension(self, dim):
        return [(b, d) for dd, b, d in self.points if dd == dim]

    def essential_count(self, dim):
        return sum(1 for dd, _, d in self.points if dd == dim and math.isinf(d))

    def to_csv(self):
        lines = ["dim,birth,death"]
        for d, b, x in self.points:
            death = "inf" if math.isinf(x) else repr(x)
            lines.append(f"{d},{b!r},{death}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text, source="<diagram>"):
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "dim,birth,death":
            raise ValidationError(f"{source}: expected header 'dim,birth,death'")
        pts = []
        for lineno, line in enumerate(lines[1:], start=2):
            try:
                d, b, x = line.split(",")
                death = math.inf if x == "inf" else float(x)
                pts.append((int(d), float(b), death))
            except ValueError:
                raise ValidationError(f"{source}:{lineno}: malformed diagram row")
        return cls(pts)

    @classmethod
    def read(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_csv(fh.read(), source=str(path))


def tower_to_filtration(stream) -> FilteredComplex:
    """Equivalent filtration of a tower: additions insert at the current
    scale; a contraction (u, v) cones the star of u to v before u is
    renamed, which preserves the persistence of the tower."""
    live = {}  # simplex tuple -> column index (earliest)
    star = {}  # vertex -> set of live simplex tuples
    out = []  # (vertices, value)
    cur = None

    def insert(simplex, value, idx):
        if simplex in live:
            return
        for f in itertools.combinations(simplex, len(simplex) - 1):
            if f and f not in live:
                raise MalformedStreamError(idx, f"missing face {f} of {simplex}")
        live[simplex] = len(out)
        out.append((simplex, value))
        for v in simplex:
            star.setdefault(v, set()).add(simplex)

    tokens = list(stream)
    for idx, tok in enumerate(tokens):
        if isinstance(tok, ScaleToken):
            if cur is not None and tok.value <= cur:
                raise MalformedStreamError(idx, "scales must strictly increase")
            cur = tok.value
        elif isinstance(tok, AddToken):
            if cur is None:
                raise MalformedStreamError(idx, "token before any scale")
            if tok.vertices in live:
                raise MalformedStreamError(idx, f"duplicate add {tok.vertices}")
            insert(tok.vertices, cur, idx)
        elif isinstance(tok, ContractToken):
            u, v = tok.source, tok.target
            if (u,) not in live or (v,) not in live or u == v:
                raise MalformedStreamError(idx, f"bad contraction {u}->{v}")
            cone = []
            for simplex in star.get(u, ()):
                joined = tuple(sorted(set(simplex) | {v}))
                cone.append(joined)
            for joined in sorted(set(cone), key=lambda s: (len(s), s)):
                for size in range(1, len(joined) + 1):
                    for face in itertools.combinations(joined, size):
                        if face not in live:
                            insert(face, cur, idx)
            # rename u to v in the live complex; output columns keep u
            for simplex in sorted(star.pop(u, ()), key=lambda s: (len(s), s)):
                renamed = tuple(sorted(set(v if x == u else x for x in simplex)))
                col = live.pop(simplex)
                for w in simplex:
                    if w != u:
                        star[w].discard(simplex)
                if renamed in live:
                    live[renamed] = min(live[renamed], col)
                else:
                    live[renamed] = col
                    for w in renamed:
                        star.setdefault(w, set()).add(renamed)
        else:
            raise MalformedStreamError(idx, f"unknown token {tok!r}")
    fc = FilteredComplex(out)
    fc.sort()
    return fc


def _reduce_python(flat, offsets):
    n = len(offsets) - 1
    pivot_owner = np.full(n, -1, dtype=np.int64)
    cols = [flat[offsets[j] : offsets[j + 1]].copy() for j in range(n)]
    for j in range(n):
        col = cols[j]
        while len(col) > 0:
            piv = col[-1]
            owner = pivot_owner[piv]
            if owner < 0:
                pivot_owner[piv] = j
                break
            col = np.setxor1d(col, cols[owner])
        cols[j] = col
    return pivot_owner


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _xor_merge(a, b):
        out = np.empty(len(a) + len(b), dtype=np.int32)
        i = j = k = 0
        while i < len(a) and j < len(b):
            if a[i] < b[j]:
                out[k] = a[i]
                i += 1
                k += 1
            elif a[i] > b[j]:
                out[k] = b[j]
                j += 1
                k += 1
            else:
                i += 1
                j += 1
        while i < len(a):
            out[k] = a[i]
            i += 1
            k += 1
        while j < len(b):
            out[k] = b[j]
            j += 1
            k += 1
        return out[:k]

    @numba.njit(cache=True)
    def _reduce_numba(flat, offsets):
        n = len(offsets) - 1
        pivot_owner = np.full(n, -1, dtype=np.int64)
        cols = _NumbaList()
        for j in range(n):
            cols.append(flat[offsets[j] : offsets[j + 1]].copy())
        for j in range(n):
            col = cols[j]
            while len(col) > 0:
                piv = col[-1]
                owner = pivot_owner[piv]
                if owner < 0:
                    pivot_owner[piv] = j
                    break
                col = _xor_merge(col, cols[owner])
            cols[j] = col
        return pivot_owner


def persistence_diagram(fc: FilteredComplex, k) -> PersistenceDiagram:
    """Standard boundary-matrix reduction over GF(2); reports dimensions
    0..k and discards zero-length intervals."""
    if k < 0:
        raise ValidationError("skeleton dimension must be nonnegative")
    simplices = fc.simplices
    n = len(simplices)
    if n == 0:
        return PersistenceDiagram([])
    index = {}
    for i, (verts, _) in enumerate(simplices):
        if verts in index:
            raise ValidationError(f"duplicate simplex {verts} in filtration")
        index[verts] = i
    flat = []
    offsets = np.zeros(n + 1, dtype=np.int64)
    for i, (verts, _) in enumerate(simplices):
        if len(verts) > 1:
            faces = sorted(
                index[f] for f in itertools.combinations(verts, len(verts) - 1)
            )
            flat.extend(faces)
        offsets[i + 1] = len(flat)
    flat = np.asarray(flat, dtype=np.int32)
    if _HAVE_NUMBA and n > 512:
        pivot_owner = _reduce_numba(flat, offsets)
    else:
        pivot_owner = _reduce_python(flat, offsets)

    # row i paired with column j: class of simplex i dies when j enters;
    # a column that claimed a pivot is negative and creates no class
    negative = np.zeros(n, dtype=bool)
    owners = pivot_owner[pivot_owner >= 0]
    negative[owners] = True
    points = []
    for piv in np.nonzero(pivot_owner >= 0)[0]:
        j = int(pivot_owner[piv])
        verts_b, birth = simplices[piv]
        death = simplices[j][1]
        dim = len(verts_b) - 1
        if dim <= k and birth != death:
            points.append((dim, birth, death))
    for i, (verts, birth) in enumerate(simplices):
        if negative[i] or pivot_owner[i] >= 0:
            continue
        dim = len(verts) - 1
        if dim <= k:
            points.append((dim, birth, math.inf))
    return PersistenceDiagram(points)
