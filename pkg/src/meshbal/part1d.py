"""Weighted 1D partitioning by iterative multi-section.

Given weighted keys in ``[0, 1)``, find cuts ``a_1 <= ... <= a_{p-1}`` so that
the weight left of ``a_i`` is about ``W*i/p``.  Every cut keeps its own search
box.  One iteration lays ``k`` equal subintervals over each open box (so
``(p-1)*k + 1`` boundaries in total when the boxes tile ``[0, 1)``), bins all
items into the union of those boundaries in a single pass, and shrinks each
box to the subinterval holding its target.  A box is finished once the
subinterval that holds its target contains a single distinct key, or its
weight drops to ``tol * W``.

Cuts sit on items: ``a_i`` is the largest key whose strict-left weight is
``<= W*i/p``.  Items strictly between cuts take the interval's part; items
whose key equals a cut are ordered by owner and split by the same prefix rule
the refinement-tree partitioner uses, so heavy tied groups spread over parts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .rtree import PartitionAssignment, as_exact, exclusive_cumsum, interval_parts

# fixed shard size keeps reductions bit-identical for any worker count
SHARD_SIZE = 1 << 16


class WeightedKey(NamedTuple):
    key: float
    weight: float
    owner: int


@dataclass(frozen=True)
class CutSet:
    cuts: tuple[float, ...]
    iterations: int = 0

    def __len__(self) -> int:
        return len(self.cuts)


@dataclass
class CutBox:
    lo: float
    hi: float
    cw_lo: float
    cw_hi: float


def _as_arrays(items):
    if isinstance(items, tuple) and len(items) == 3 and all(isinstance(a, np.ndarray) for a in items):
        keys, weights, owners = items
    else:
        items = list(items)
        keys = np.array([it[0] for it in items], dtype=float)
        weights = np.array([it[1] for it in items], dtype=float)
        owners = np.array([it[2] for it in items], dtype=np.int64)
    keys = np.asarray(keys, dtype=float)
    owners = np.asarray(owners, dtype=np.int64)
    if not (len(keys) == len(weights) == len(owners)):
        raise InvalidArgumentError("keys, weights and owners differ in length")
    if len(keys) and (np.any(~np.isfinite(keys)) or keys.min() < 0 or keys.max() >= 1):
        raise InvalidArgumentError("keys must lie in [0, 1)")
    return keys, as_exact(weights), owners


def cumulative_weight(items, x: float) -> float:
    """Total weight of items with key strictly below ``x``."""
    keys, weights, _ = _as_arrays(items)
    return weights[keys < x].sum().item()


def _accumulate(keys, weights, bounds, workers):
    """Per-bin weight, min key and max key for bins cut at ``bounds``.

    Bin ``b`` holds keys in ``[bounds[b-1], bounds[b])``.
    """
    nb = len(bounds) + 1

    def shard(lo):
        k = keys[lo : lo + SHARD_SIZE]
        b = np.searchsorted(bounds, k, side="right")
        w = np.bincount(b, weights=weights[lo : lo + SHARD_SIZE], minlength=nb)
        mn = np.full(nb, np.inf)
        mx = np.full(nb, -np.inf)
        np.minimum.at(mn, b, k)
        np.maximum.at(mx, b, k)
        return w, mn, mx

    starts = range(0, len(keys), SHARD_SIZE)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(shard, starts))
    else:
        results = [shard(s) for s in starts]
    w = np.zeros(nb)
    mn = np.full(nb, np.inf)
    mx = np.full(nb, -np.inf)
    for sw, smn, smx in results:
        w += sw
        np.minimum(mn, smn, out=mn)
        np.maximum(mx, smx, out=mx)
    return w, mn, mx


def _snap(keys, weights, box: CutBox, scaled_target, p):
    """Largest key in ``[lo, hi)`` whose strict-left weight is within target."""
    inside = (keys >= box.lo) & (keys < box.hi)
    k = keys[inside]
    order = np.argsort(k, kind="stable")
    k = k[order]
    prefix = box.cw_lo + exclusive_cumsum(weights[inside][order])
    j = np.searchsorted(prefix * p, scaled_target, side="right") - 1
    return float(k[max(j, 0)])


def find_cuts(keys, weights, p: int, k: int = 4, tol: float = 0.0, max_iter: int = 64, workers: int = 1) -> CutSet:
    total = weights.sum()
    ncuts = p - 1
    if ncuts == 0:
        return CutSet(())
    # compare cw*p against W*i to stay exact for integer weights
    scaled = np.array([total * i for i in range(1, p)], dtype=float)
    boxes = [CutBox(0.0, 1.0, 0.0, float(total)) for _ in range(ncuts)]
    cuts: list[float | None] = [None] * ncuts
    frac = np.arange(k + 1) / k

    it = 0
    while it < max_iter and any(c is None for c in cuts):
        it += 1
        open_ = [i for i in range(ncuts) if cuts[i] is None]
        grids = []
        for i in open_:
            b = boxes[i]
            g = b.lo + (b.hi - b.lo) * frac
            g[0], g[-1] = b.lo, b.hi
            grids.append(g)
        bounds = np.unique(np.concatenate(grids))
        binw, mn, mx = _accumulate(keys, weights, bounds, workers)
        cw_at = np.cumsum(binw)[:-1]  # weight strictly below bounds[j]

        for i, g in zip(open_, grids):
            pos = np.searchsorted(bounds, g)
            cw = cw_at[pos]
            j = int(np.searchsorted(cw * p, scaled[i], side="right")) - 1
            j = min(max(j, 0), k - 1)
            box = boxes[i] = CutBox(float(g[j]), float(g[j + 1]), float(cw[j]), float(cw[j + 1]))
            lo_bin, hi_bin = pos[j] + 1, pos[j + 1] + 1
            kmin, kmax = mn[lo_bin:hi_bin].min(), mx[lo_bin:hi_bin].max()
            if kmin == kmax:
                cuts[i] = float(kmin)
            elif box.cw_hi - box.cw_lo <= tol * total:
                cuts[i] = _snap(keys, weights, box, scaled[i], p)

    for i in range(ncuts):
        if cuts[i] is None:
            cuts[i] = _snap(keys, weights, boxes[i], scaled[i], p)
    return CutSet(tuple(cuts), it)


def assign(keys, weights, owners, cuts: Sequence[float], p: int) -> np.ndarray:
    """Part of every item given snapped cuts."""
    total = weights.sum()
    parts = np.searchsorted(np.asarray(cuts, dtype=float), keys, side="right").astype(np.int64)
    for x in sorted(set(cuts)):
        at = np.flatnonzero(keys == x)
        at = at[np.argsort(owners[at], kind="stable")]
        below = weights[keys < x].sum()
        prefix = below + exclusive_cumsum(weights[at])
        parts[at] = interval_parts(prefix, total, p)
    return parts


def partition_1d(
    items,
    p: int,
    k: int = 4,
    tol: float = 0.0,
    max_iter: int = 64,
    workers: int = 1,
) -> tuple[CutSet, PartitionAssignment]:
    """Split weighted keys into ``p`` contiguous parts of near-equal weight.

    Args:
        items: ``WeightedKey`` triples ``(key, weight, owner)``, or a tuple of
            three arrays ``(keys, weights, owners)``.  Owners must be unique.
        p: number of parts.
        k: subintervals per search box per iteration, ``>= 2``.
        tol: a box stops once its weight is ``<= tol * W``.  The cut is
            snapped onto an item afterwards, so the result does not depend
            on ``tol``.
        max_iter: iteration cap.
        workers: threads for the binning pass.

    Returns:
        The cuts and the owner -> part assignment.
    """
    if int(p) != p or p < 1:
        raise InvalidArgumentError(f"p must be a positive integer, got {p}")
    if int(k) != k or k < 2:
        raise InvalidArgumentError(f"k must be an integer >= 2, got {k}")
    keys, weights, owners = _as_arrays(items)
    if len(keys) == 0:
        raise InvalidArgumentError("no items to partition")
    if weights.sum() <= 0:
        raise DegenerateInputError("total item weight is zero")
    if len(np.unique(owners)) != len(owners):
        raise InvalidArgumentError("item owners must be unique")

    cutset = find_cuts(keys, weights, int(p), int(k), tol, max_iter, workers)
    parts = assign(keys, weights, owners, cutset.cuts, int(p))
    return cutset, PartitionAssignment.from_arrays(owners.tolist(), parts, int(p))
