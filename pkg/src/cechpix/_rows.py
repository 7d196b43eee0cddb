"""Set operations on integer row arrays (pixel corners, simplex vertex rows).

Rows are kept lexicographically sorted; membership and merges go through
structured views so comparisons stay exact.
"""

from __future__ import annotations

import numpy as np


def _as_struct(rows):
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if rows.ndim != 2:
        raise ValueError("expected an (n, m) array")
    dt = np.dtype([(f"f{i}", np.int64) for i in range(rows.shape[1])])
    return rows.view(dt).ravel()


def empty(width):
    return np.empty((0, width), dtype=np.int64)


def sort_rows(rows):
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if len(rows) == 0:
        return rows
    order = np.argsort(_as_struct(rows), kind="stable")
    return rows[order]


def unique_rows(rows):
    rows = sort_rows(rows)
    if len(rows) <= 1:
        return rows
    keep = np.empty(len(rows), dtype=bool)
    keep[0] = True
    keep[1:] = np.any(rows[1:] != rows[:-1], axis=1)
    return rows[keep]


def member_mask(rows, sorted_rows):
    """Boolean mask: which rows occur in sorted_rows (sorted, unique)."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if len(rows) == 0 or len(sorted_rows) == 0:
        return np.zeros(len(rows), dtype=bool)
    hay = _as_struct(sorted_rows)
    needles = _as_struct(rows)
    idx = np.searchsorted(hay, needles)
    idx_c = np.minimum(idx, len(hay) - 1)
    return (idx < len(hay)) & (hay[idx_c] == needles)


def locate(rows, sorted_rows):
    """Indices of rows inside sorted_rows; every row must be present."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if len(rows) == 0:
        return np.empty(0, dtype=np.int64)
    hay = _as_struct(sorted_rows)
    needles = _as_struct(rows)
    idx = np.searchsorted(hay, needles)
    if np.any(idx >= len(hay)) or np.any(hay[np.minimum(idx, len(hay) - 1)] != needles):
        raise KeyError("row not present")
    return idx


def union(a, b):
    if len(a) == 0:
        return unique_rows(b)
    if len(b) == 0:
        return unique_rows(a)
    return unique_rows(np.concatenate([a, b], axis=0))


def difference(a, b_sorted):
    """Rows of a not present in b (a need not be sorted)."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    if len(a) == 0 or len(b_sorted) == 0:
        return a
    return a[~member_mask(a, b_sorted)]
