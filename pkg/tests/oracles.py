"""Brute-force reference implementations used by the tests.

Nothing here calls into the library's algorithms; each helper recomputes its
answer the slow, obvious way.
"""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np


# -- geometry / topology ------------------------------------------------------


def tet_volume(p0, p1, p2, p3) -> float:
    a, b, c = (np.subtract(q, p0) for q in (p1, p2, p3))
    return float(np.dot(a, np.cross(b, c))) / 6.0


def face_incidence(tets) -> Counter:
    """Number of tets touching each (sorted) vertex triple."""
    count = Counter()
    for t in tets:
        for tri in itertools.combinations(sorted(t), 3):
            count[tri] += 1
    return count


def interior_pairs(tets_by_id: dict) -> list:
    """Sorted (a, b) pairs of element ids sharing a whole face."""
    owners = {}
    for eid, t in tets_by_id.items():
        for tri in itertools.combinations(sorted(t), 3):
            owners.setdefault(tri, []).append(eid)
    return sorted(tuple(sorted(v)) for v in owners.values() if len(v) == 2)


def edge_cut(tets_by_id: dict, part: dict) -> int:
    return sum(1 for a, b in interior_pairs(tets_by_id) if part[a] != part[b])


# -- refinement forests -------------------------------------------------------


def random_tree_shape(rng, n_roots: int, n_leaves: int):
    """Roots ``0..n_roots-1`` and a children map grown by random splits.

    Returns ``(roots, children, splits)`` where ``splits`` lists
    ``(node, left, right)`` in the order they happened.
    """
    roots = list(range(n_roots))
    leaves = list(roots)
    children = {}
    splits = []
    nxt = n_roots
    while len(leaves) < n_leaves:
        i = int(rng.integers(len(leaves)))
        node = leaves[i]
        left, right = nxt, nxt + 1
        nxt += 2
        children[node] = (left, right)
        splits.append((node, left, right))
        leaves[i] = left
        leaves.append(right)
    return roots, children, splits


def dfs_leaves(roots, children) -> list:
    out = []
    for r in roots:
        stack = [r]
        while stack:
            n = stack.pop()
            kids = children.get(n)
            if kids is None:
                out.append(n)
            else:
                stack.append(kids[1])
                stack.append(kids[0])
    return out


def interval_rule(order, weights, p) -> dict:
    """Part of each leaf by walking the prefix sums with exact fractions."""
    from fractions import Fraction

    total = sum(Fraction(weights[e]) for e in order)
    out, s = {}, Fraction(0)
    for e in order:
        out[e] = min(int(s * p / total), p - 1)
        s += Fraction(weights[e])
    return out


# -- space-filling curves -----------------------------------------------------


def morton_by_bits(ix: int, iy: int, iz: int, m: int) -> int:
    key = 0
    for b in range(m - 1, -1, -1):
        key = key * 8 + ((ix >> b) & 1) * 4 + ((iy >> b) & 1) * 2 + ((iz >> b) & 1)
    return key


def lattice(m: int) -> np.ndarray:
    n = 1 << m
    g = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"), axis=-1)
    return g.reshape(-1, 3)


def cell_centers(cells: np.ndarray, m: int) -> np.ndarray:
    return (cells + 0.5) / float(1 << m)


# -- 1D partitioning ----------------------------------------------------------


_CUT_TABLES: dict = {}


def _cut_table(n: int, p: int) -> np.ndarray:
    """Every placement of ``p - 1`` cuts into ``n + 1`` gaps, with the two ends."""
    key = (n, p)
    if key not in _CUT_TABLES:
        inner = list(itertools.combinations_with_replacement(range(n + 1), p - 1))
        inner = np.array(inner, dtype=np.int64).reshape(len(inner), p - 1)
        ends = np.broadcast_to([[0]], (len(inner), 1))
        _CUT_TABLES[key] = np.hstack([ends, inner, ends + n])
    return _CUT_TABLES[key]


def optimal_max_part(weights, p: int):
    """Smallest achievable max part weight over all ways of cutting the
    sequence into ``p`` contiguous (possibly empty) runs, by enumeration."""
    pre = np.concatenate([[0], np.cumsum(weights)])
    bounds = _cut_table(len(weights), p)
    sums = pre[bounds[:, 1:]] - pre[bounds[:, :-1]]
    return sums.max(axis=1).min().item()


def part_totals(part: dict, weight: dict, p: int) -> list:
    out = [0] * p
    for e, q in part.items():
        out[q] += weight[e]
    return out


# -- remapping ----------------------------------------------------------------


def retained(S, perm) -> float:
    return sum(S[perm[j]][j] for j in range(len(perm)))


def best_retained(S) -> float:
    """Largest retained weight over all ``p!`` placements."""
    S = np.asarray(S)
    p = len(S)
    perms = np.array(list(itertools.permutations(range(p))), dtype=np.int64)
    return S[perms, np.arange(p)].sum(axis=1).max().item()


def similarity(old: dict, new: dict, weight: dict, p: int) -> list:
    S = [[0] * p for _ in range(p)]
    for e in old:
        S[old[e]][new[e]] += weight[e]
    return S
