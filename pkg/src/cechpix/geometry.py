"""Points, balls, minimum enclosing balls, and common-intersection tests."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import IndeterminateIntersection, ValidationError

_CONTAINS_REL = 1.0 + 1e-12
_CONTAINS_ABS = 1e-14


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball."""

    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValidationError("ball radius must be nonnegative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, x, slack=0.0):
        return _dist(self.center, x) <= self.radius + slack


class PointCloud:
    """Finite list of distinct points in R^d with stable ids 0..n-1."""

    def __init__(self, coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if coords.size and coords.ndim != 2:
            raise ValidationError("points must form an (n, d) array")
        if coords.size and not np.all(np.isfinite(coords)):
            bad = int(np.argwhere(~np.isfinite(coords).all(axis=1))[0][0])
            raise ValidationError(f"point {bad}: coordinates must be finite")
        self.coords = coords
        if len(coords) > 1:
            _, first = np.unique(coords, axis=0, return_index=True)
            if len(first) != len(coords):
                dup = sorted(set(range(len(coords))) - set(first.tolist()))[0]
                raise ValidationError(f"point {dup}: exact duplicate point")

    @classmethod
    def from_text(cls, text, source="<text>"):
        rows = []
        dim = None
        lines = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals = [float(tok) for tok in line.split()]
            except ValueError:
                raise ValidationError(f"{source}:{lineno}: not a coordinate line")
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise ValidationError(
                    f"{source}:{lineno}: expected {dim} coordinates, got {len(vals)}"
                )
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"{source}:{lineno}: coordinates must be finite")
            rows.append(vals)
            lines.append(lineno)
        if not rows:
            raise ValidationError(f"{source}: no points found")
        arr = np.asarray(rows, dtype=float)
        if len(arr) > 1:
            _, first = np.unique(arr, axis=0, return_index=True)
            if len(first) != len(arr):
                dup = sorted(set(range(len(arr))) - set(first.tolist()))[0]
                raise ValidationError(f"{source}:{lines[dup]}: exact duplicate point")
        return cls(arr)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path))

    @property
    def n(self):
        return len(self.coords)

    @property
    def dim(self):
        return self.coords.shape[1]

    def __len__(self):
        return self.n

    def min_distance(self):
        if self.n < 2:
            return 0.0
        d = self.coords[:, None, :] - self.coords[None, :, :]
        dist = np.sqrt((d * d).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        return float(dist.min())

    def diameter(self):
        if self.n < 2:
            return 0.0
        d = self.coords[:, None, :] - self.coords[None, :, :]
        return float(np.sqrt((d * d).sum(axis=2)).max())


def _dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def _support_ball(support, dim):
    # Minimal ball with every support point on its boundary: the center lies
    # in the affine hull of the support.
    if not support:
        return None
    S = np.asarray(support, dtype=float)
    if len(S) == 1:
        return S[0], 0.0
    q0 = S[0]
    V = S[1:] - q0
    M = V @ V.T
    rhs = 0.5 * (V * V).sum(axis=1)
    lam, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    center = q0 + lam @ V
    radius = float(np.max(np.sqrt(((S - center) ** 2).sum(axis=1))))
    return center, radius


def _in_ball(ball, p):
    if ball is None:
        return False
    center, radius = ball
    return _dist(center, p) <= radius * _CONTAINS_REL + _CONTAINS_ABS


def _welzl(pts, n, support, dim):
    if n == 0 or len(support) == dim + 1:
        return _support_ball(support, dim)
    b = _welzl(pts, n - 1, support, dim)
    p = pts[n - 1]
    if _in_ball(b, p):
        return b
    b = _welzl(pts, n - 1, support + [p], dim)
    # move-to-front: boundary points surface early in later calls
    pts[1:n] = pts[0 : n - 1]
    pts[0] = p
    return b


def min_enclosing_ball(points) -> Ball:
    """Smallest ball containing all points.

    Deterministic for a fixed input order: the internal shuffle is seeded
    from a hash of the coordinates.
    """
    pts = [tuple(float(c) for c in p) for p in points]
    if not pts:
        raise ValidationError("empty simplex")
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise ValidationError("points must share one dimension")
    if len(pts) == 1:
        return Ball(pts[0], 0.0)
    seed = int.from_bytes(
        hashlib.blake2b(np.asarray(pts, dtype=float).tobytes(), digest_size=8).digest(),
        "big",
    )
    random.Random(seed).shuffle(pts)
    center, radius = _welzl(pts, len(pts), [], dim)
    return Ball(tuple(center), radius)


def _minmax_margin(x, centers, radii):
    return float(np.max(np.sqrt(((centers - x) ** 2).sum(axis=1)) - radii))


def _solve_min_margin(centers, radii):
    """Minimize max_i(|x - c_i| - r_i); returns (value, converged)."""
    d = centers.shape[1]
    x0 = centers.mean(axis=0)
    best = _minmax_margin(x0, centers, radii)
    best_converged = False

    def constraint(i):
        def fun(z):
            return z[-1] + radii[i] - np.linalg.norm(z[:d] - centers[i])

        def jac(z):
            diff = z[:d] - centers[i]
            nrm = np.linalg.norm(diff)
            g = np.zeros(d + 1)
            if nrm > 1e-300:
                g[:d] = -diff / nrm
            g[-1] = 1.0
            return g

        return {"type": "ineq", "fun": fun, "jac": jac}

    cons = [constraint(i) for i in range(len(centers))]
    obj_jac = np.zeros(d + 1)
    obj_jac[-1] = 1.0
    for start in (x0, centers[0], centers[int(np.argmin(radii))]):
        z0 = np.append(start, _minmax_margin(start, centers, radii) + 1.0)
        res = minimize(
            lambda z: z[-1],
            z0,
            jac=lambda z: obj_jac,
            constraints=cons,
            method="SLSQP",
            options={"maxiter": 300, "ftol": 1e-14},
        )
        val = _minmax_margin(res.x[:d], centers, radii)
        if val < best:
            best = val
        if res.success:
            best_converged = True
            break
    return best, best_converged


def _subgradient_polish(centers, radii, iterations):
    x = centers.mean(axis=0)
    best = _minmax_margin(x, centers, radii)
    scale = max(1.0, float(np.abs(centers).max()) + float(radii.max()))
    for it in range(iterations):
        diffs = x - centers
        dists = np.sqrt((diffs * diffs).sum(axis=1))
        i = int(np.argmax(dists - radii))
        if dists[i] < 1e-300:
            break
        g = diffs[i] / dists[i]
        x = x - (scale / math.sqrt(it + 1.0)) * g
        best = min(best, _minmax_margin(x, centers, radii))
    return best


def balls_intersect(balls, tol=1e-9, max_iterations=10**5) -> bool:
    """Whether the closed balls share a common point, decided to tolerance tol.

    Decides the sign of min_x max_i(|x - c_i| - r_i); the minimum is taken
    over a convex function, so a local solve is global.
    """
    if not balls:
        raise ValidationError("nonempty list of balls required")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    dim = balls[0].dim
    if any(b.dim != dim for b in balls):
        raise ValidationError("balls must share one dimension")
    if len(balls) == 1:
        return True
    centers = np.asarray([b.center for b in balls], dtype=float)
    radii = np.asarray([b.radius for b in balls], dtype=float)

    value, converged = _solve_min_margin(centers, radii)
    if not converged:
        value = min(value, _subgradient_polish(centers, radii, max_iterations))
        if -tol < value <= tol:
            raise IndeterminateIntersection(
                "indeterminate intersection: minimum margin "
                f"{value:g} within +/-{tol:g}; perturb the radii"
            )
    return value <= tol
