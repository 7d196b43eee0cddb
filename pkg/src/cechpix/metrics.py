"""Multiplicative (log-scale) bottleneck distance and the interleaving
certificate.

Dimension-0 convention: births are set to 0 on both sides and excluded from
the log map; H0 is compared through death times (merge scales) plus equality
of essential-class counts. Exact Cech H0 classes are born at 0, where the
log map is undefined, while the interleaving constrains merge times.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def _finite_essential(diagram, dim):
    finite, essential = [], []
    for b, d in diagram.in_dimension(dim):
        if math.isinf(d):
            essential.append(b)
        else:
            finite.append((b, d))
    return finite, essential


def _line_bottleneck(xs, ys):
    """Bottleneck matching of two multisets on the line, no diagonal."""
    if len(xs) != len(ys):
        return math.inf
    if not xs:
        return 0.0
    xs, ys = np.sort(np.asarray(xs)), np.sort(np.asarray(ys))
    return float(np.max(np.abs(xs - ys)))


def _kuhn_cover(required, adjacency, n_right):
    """Can every required left node be matched (distinct right nodes)?"""
    match_right = {}

    def augment(u, seen):
        for v in adjacency[u]:
            if v in seen:
                continue
            seen.add(v)
            if v not in match_right or augment(match_right[v], seen):
                match_right[v] = u
                return True
        return False

    for u in required:
        if not augment(u, set()):
            return False
    return True


def _finite_bottleneck(pa, pb):
    """Exact bottleneck of finite log-points with diagonal matching."""
    if not pa and not pb:
        return 0.0
    A = np.asarray(pa, dtype=float).reshape(-1, 2)
    B = np.asarray(pb, dtype=float).reshape(-1, 2)
    half_a = (A[:, 1] - A[:, 0]) / 2.0 if len(A) else np.empty(0)
    half_b = (B[:, 1] - B[:, 0]) / 2.0 if len(B) else np.empty(0)
    upper = max(
        half_a.max() if len(half_a) else 0.0,
        half_b.max() if len(half_b) else 0.0,
    )
    if len(A) and len(B):
        cost = np.maximum(
            np.abs(A[:, None, 0] - B[None, :, 0]),
            np.abs(A[:, None, 1] - B[None, :, 1]),
        )
    else:
        cost = np.empty((len(A), len(B)))
    cands = [0.0, upper]
    cands.extend(half_a.tolist())
    cands.extend(half_b.tolist())
    if cost.size:
        cands.extend(cost[cost <= upper].ravel().tolist())
    cands = sorted(set(cands))

    def feasible(delta):
        # long points (diagonal too far) must match across; Mendelsohn-Dulmage
        # lets the two covering requirements be checked independently
        long_a = np.nonzero(half_a > delta)[0]
        long_b = np.nonzero(half_b > delta)[0]
        if len(long_a) and not len(B):
            return False
        if len(long_b) and not len(A):
            return False
        if len(long_a):
            adj = {int(i): np.nonzero(cost[i] <= delta)[0].tolist() for i in long_a}
            if not _kuhn_cover([int(i) for i in long_a], adj, len(B)):
                return False
        if len(long_b):
            adj = {int(j): np.nonzero(cost[:, j] <= delta)[0].tolist() for j in long_b}
            if not _kuhn_cover([int(j) for j in long_b], adj, len(A)):
                return False
        return True

    lo, hi = 0, len(cands) - 1
    if feasible(cands[0]):
        return float(cands[0])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(cands[mid]):
            hi = mid
        else:
            lo = mid
    return float(cands[hi])


def log_bottleneck(d1, d2, dimension) -> float:
    """Bottleneck distance after mapping (b, d) to (ln b, ln d).

    Essential points match only essential points at cost |ln b1 - ln b2|;
    mismatched essential counts give infinity. Dimension 0 follows the
    death-only convention described in the module docstring.
    """
    fin1, ess1 = _finite_essential(d1, dimension)
    fin2, ess2 = _finite_essential(d2, dimension)
    if dimension == 0:
        if len(ess1) != len(ess2) or len(fin1) != len(fin2):
            return math.inf
        deaths1 = [d for _, d in fin1]
        deaths2 = [d for _, d in fin2]
        if any(d <= 0 for d in deaths1 + deaths2):
            raise ValidationError("H0 deaths must be positive for the log map")
        return _line_bottleneck(np.log(deaths1), np.log(deaths2))
    if len(ess1) != len(ess2):
        return math.inf
    for b, _ in fin1 + fin2:
        if b <= 0:
            raise ValidationError("finite births must be positive for the log map")
    if any(b <= 0 for b in ess1 + ess2):
        raise ValidationError("essential births must be positive for the log map")
    ess = _line_bottleneck(np.log(ess1) if ess1 else [], np.log(ess2) if ess2 else [])
    fin = _finite_bottleneck(
        [(math.log(b), math.log(d)) for b, d in fin1],
        [(math.log(b), math.log(d)) for b, d in fin2],
    )
    return max(ess, fin)


@dataclass
class DimensionReport:
    dim: int
    bottleneck: float
    bound: float
    passed: bool
    matched: int = 0
    diagonal: int = 0


@dataclass
class InterleavingReport:
    epsilon_user: float
    k: int
    per_dim: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.per_dim)

    def to_json(self, mode=None, n=None, dim=None, tokens=None):
        payload = {
            "epsilon": self.epsilon_user,
            "mode": mode,
            "n": n,
            "d": dim,
            "k": self.k,
            "per_dim": [
                {
                    "dim": r.dim,
                    "bottleneck": ("inf" if math.isinf(r.bottleneck) else r.bottleneck),
                    "bound": r.bound,
                    "pass": r.passed,
                }
                for r in self.per_dim
            ],
            "tokens": tokens,
        }
        return json.dumps(payload, indent=2) + "\n"


PASS_TOLERANCE = 1e-9


def check_interleaving(d_approx, d_exact, epsilon_user, k) -> InterleavingReport:
    """Per-dimension log-bottleneck check against the bound ln(1+epsilon)."""
    if epsilon_user <= 0:
        raise ValidationError("epsilon must be positive")
    for dia in (d_approx, d_exact):
        if any(dd > k for dd, _, _ in dia.points):
            raise ValidationError(
                f"diagram contains dimensions above k={k}; mismatched skeleton"
            )
    bound = math.log1p(epsilon_user)
    report = InterleavingReport(epsilon_user=epsilon_user, k=k)
    for dim in range(k + 1):
        value = log_bottleneck(d_approx, d_exact, dim)
        fin_a, _ = _finite_essential(d_approx, dim)
        fin_e, _ = _finite_essential(d_exact, dim)
        if dim == 0 or math.isinf(value):
            matched = min(len(fin_a), len(fin_e))
            diagonal = abs(len(fin_a) - len(fin_e))
        else:
            # points whose diagonal option exceeds the achieved distance are
            # necessarily matched point-to-point
            long_a = sum(1 for b, d in fin_a if math.log(d / b) / 2.0 > value)
            long_b = sum(1 for b, d in fin_e if math.log(d / b) / 2.0 > value)
            matched = long_a + long_b
            diagonal = (len(fin_a) - long_a) + (len(fin_e) - long_b)
        report.per_dim.append(
            DimensionReport(
                dim=dim,
                bottleneck=value,
                bound=bound,
                passed=value <= bound + PASS_TOLERANCE,
                matched=matched,
                diagonal=diagonal,
            )
        )
    return report
