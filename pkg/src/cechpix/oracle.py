"""Brute-force exact Cech filtration for small inputs; ground truth for
every approximation claim made elsewhere."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import OracleLimitError, ValidationError
from .geometry import PointCloud, min_enclosing_ball

ORACLE_MAX_POINTS = 25


@dataclass
class FilteredComplex:
    """Simplices with birth values, ordered by (birth, dimension, lex)."""

    simplices: list  # [(vertex tuple, birth float)]

    def __len__(self):
        return len(self.simplices)

    def __iter__(self):
        return iter(self.simplices)

    def sort(self):
        self.simplices.sort(key=lambda sv: (sv[1], len(sv[0]), sv[0]))

    def validate(self):
        births = {}
        for verts, birth in self.simplices:
            if list(verts) != sorted(set(verts)):
                raise ValidationError(f"simplex {verts} is not strictly sorted")
            for face in itertools.combinations(verts, len(verts) - 1):
                if len(face) == 0:
                    continue
                if face not in births:
                    raise ValidationError(f"face {face} of {verts} missing")
                if births[face] > birth:
                    raise ValidationError(f"face {face} born after {verts}")
            births[verts] = birth

    def to_text(self):
        return "".join(
            f"{birth!r} " + " ".join(str(v) for v in verts) + "\n"
            for verts, birth in self.simplices
        )

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text, source="<filtration>"):
        simplices = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                birth = float(parts[0])
                verts = tuple(int(v) for v in parts[1:])
                if not verts or list(verts) != sorted(set(verts)):
                    raise ValueError
            except ValueError:
                raise ValidationError(f"{source}:{lineno}: malformed filtration line")
            simplices.append((verts, birth))
        return cls(simplices)

    @classmethod
    def read(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path))


def cech_filtration(P: PointCloud, k, alpha_max) -> FilteredComplex:
    """Every subset of size <= k+1 whose minimum enclosing ball has radius
    <= alpha_max, with birth equal to that radius; vertices are born at 0."""
    if alpha_max <= 0:
        raise ValidationError("alpha_max must be positive")
    if k < 0:
        raise ValidationError("skeleton dimension must be nonnegative")
    if P.n > ORACLE_MAX_POINTS:
        raise OracleLimitError(
            f"oracle limit: n={P.n} exceeds the brute-force guard "
            f"({ORACLE_MAX_POINTS} points)"
        )
    simplices = [((i,), 0.0) for i in range(P.n)]
    for size in range(2, k + 2):
        for combo in itertools.combinations(range(P.n), size):
            ball = min_enclosing_ball(P.coords[list(combo)])
            if ball.radius <= alpha_max:
                simplices.append((combo, float(ball.radius)))
    fc = FilteredComplex(simplices)
    fc.sort()
    return fc
