"""Refinement-tree partitioning.

The forest mirrors the mesh's bisection history: one binary tree per initial
element, roots in initial element order.  Leaves are visited depth first,
left child before right, and leaf ``i`` in that order gets the exclusive
prefix sum ``S_i`` of the leaf weights before it.  A leaf goes to part
``floor(S_i * p / W)``, i.e. part ``i`` owns the prefix sums in
``[W*i/p, W*(i+1)/p)``.

Interior-node weights are never formed.  The distributed variant
(:func:`partition_scanned`) only needs each rank's local total and one
exclusive scan over those totals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConsistencyError, DegenerateInputError, InvalidArgumentError
from .mesh import BisectionEvent, CoarsenEvent, TetMesh
from .vranks import scan_emulate

_EXACT_LIMIT = 2**53


@dataclass(frozen=True)
class PartitionAssignment:
    p: int
    part_of: Mapping[int, int]

    def __post_init__(self):
        if self.p < 1:
            raise InvalidArgumentError(f"p must be >= 1, got {self.p}")
        bad = [e for e, q in self.part_of.items() if not 0 <= q < self.p]
        if bad:
            raise InvalidArgumentError(f"elements {bad[:5]} have parts outside [0, {self.p})")

    def __getitem__(self, eid: int) -> int:
        return self.part_of[eid]

    def __len__(self) -> int:
        return len(self.part_of)

    def parts(self, ids: Iterable[int]) -> np.ndarray:
        return np.fromiter((self.part_of[e] for e in ids), dtype=np.int64)

    def relabel(self, mapping: Sequence[int]) -> "PartitionAssignment":
        """Assignment with every part ``j`` renamed to ``mapping[j]``."""
        return PartitionAssignment(self.p, {e: int(mapping[q]) for e, q in self.part_of.items()})

    @classmethod
    def from_arrays(cls, ids: Sequence[int], parts, p: int) -> "PartitionAssignment":
        return cls(p, dict(zip(map(int, ids), map(int, parts))))


class RefinementForest:
    """Binary refinement trees over a fixed, ordered set of roots.

    Node ids are element ids.  A node is either a leaf (a live element) or
    has exactly two children.
    """

    def __init__(self, roots: Iterable[int]):
        self.roots: tuple[int, ...] = tuple(int(r) for r in roots)
        if len(set(self.roots)) != len(self.roots):
            raise InvalidArgumentError("root ids must be unique")
        self.children: dict[int, tuple[int, int]] = {}
        self.parent: dict[int, int] = {}
        self._nodes: set[int] = set(self.roots)
        self.num_leaves = len(self.roots)
        self.version = 0
        self._order_cache: tuple[int, list[int]] | None = None

    @classmethod
    def from_mesh(cls, mesh: TetMesh) -> "RefinementForest":
        forest = cls(mesh.root_ids)
        forest.replay(mesh.events)
        return forest

    def __contains__(self, nid) -> bool:
        return nid in self._nodes

    def is_leaf(self, nid: int) -> bool:
        return nid in self._nodes and nid not in self.children

    def split(self, nid: int, left: int, right: int) -> None:
        if not self.is_leaf(nid):
            raise ConsistencyError(f"node {nid} is not a leaf of the forest")
        if left == right or left in self._nodes or right in self._nodes:
            raise ConsistencyError(f"children ({left}, {right}) of {nid} already exist")
        self.children[nid] = (left, right)
        self.parent[left] = nid
        self.parent[right] = nid
        self._nodes.update((left, right))
        self.num_leaves += 1
        self.version += 1

    def merge(self, nid: int) -> None:
        kids = self.children.get(nid)
        if kids is None or not all(self.is_leaf(k) for k in kids):
            raise ConsistencyError(f"node {nid} does not have two leaf children")
        for k in kids:
            self._nodes.discard(k)
            del self.parent[k]
        del self.children[nid]
        self.num_leaves -= 1
        self.version += 1

    def mirror_event(self, event: BisectionEvent | CoarsenEvent) -> None:
        if isinstance(event, BisectionEvent):
            self.split(event.parent, event.left_child, event.right_child)
        elif isinstance(event, CoarsenEvent):
            if self.children.get(event.parent) != (event.left_child, event.right_child):
                raise ConsistencyError(f"stale coarsen event for node {event.parent}")
            self.merge(event.parent)
        else:
            raise InvalidArgumentError(f"not a mesh event: {event!r}")

    def replay(self, events: Iterable[BisectionEvent | CoarsenEvent]) -> None:
        for ev in events:
            self.mirror_event(ev)

    def dfs_leaf_order(self) -> list[int]:
        if self._order_cache is None or self._order_cache[0] != self.version:
            order = []
            children = self.children
            for root in self.roots:
                stack = [root]
                while stack:
                    nid = stack.pop()
                    kids = children.get(nid)
                    if kids is None:
                        order.append(nid)
                    else:
                        stack.append(kids[1])
                        stack.append(kids[0])
            self._order_cache = (self.version, order)
        return list(self._order_cache[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RefinementForest):
            return NotImplemented
        return self.roots == other.roots and self.children == other.children

    __hash__ = None


def dfs_leaf_order(forest: RefinementForest) -> list[int]:
    return forest.dfs_leaf_order()


def mirror_event(forest: RefinementForest, event) -> None:
    forest.mirror_event(event)


def as_exact(values) -> np.ndarray:
    """Weights as int64 when they are all integral (and small enough that
    every partial sum is exact), float64 otherwise."""
    arr = np.asarray(values, dtype=float)
    if arr.size and (np.any(arr < 0) or not np.all(np.isfinite(arr))):
        raise InvalidArgumentError("weights must be finite and nonnegative")
    if np.all(arr == np.floor(arr)) and arr.sum() < _EXACT_LIMIT:
        return arr.astype(np.int64)
    return arr


def leaf_weights(order: Sequence[int], weights: Mapping[int, float] | None) -> np.ndarray:
    if weights is None:
        return np.ones(len(order), dtype=np.int64)
    try:
        return as_exact([weights[e] for e in order])
    except KeyError as exc:
        raise InvalidArgumentError(f"no weight given for element {exc.args[0]}") from None


def interval_parts(prefix: np.ndarray, total, p: int) -> np.ndarray:
    """Part index ``floor(prefix * p / total)`` clamped to ``p - 1``.

    Integer inputs are evaluated exactly, so a prefix sum equal to a boundary
    ``total * i / p`` lands in part ``i``.  Float inputs use plain floating
    point and may round a boundary value down.
    """
    prefix = np.asarray(prefix)
    if prefix.dtype.kind in "iu" and float(total) == int(total):
        total = int(total)
        if total * p < 2**62:
            parts = (prefix * p) // total
        else:
            parts = np.array([(int(s) * p) // total for s in prefix], dtype=np.int64)
    else:
        parts = np.floor(prefix * p / float(total)).astype(np.int64)
    return np.minimum(parts, p - 1)


def exclusive_cumsum(w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(w)
    if len(w) > 1:
        np.cumsum(w[:-1], out=out[1:])
    return out


def _check(p: int, total) -> None:
    if int(p) != p or p < 1:
        raise InvalidArgumentError(f"p must be a positive integer, got {p}")
    if total <= 0:
        raise DegenerateInputError("total leaf weight is zero; nothing to balance")


def prefix_sums(forest: RefinementForest, weights: Mapping[int, float] | None = None) -> list[tuple[int, float]]:
    """``(element_id, S_i)`` in DFS leaf order, ``S_0 = 0``."""
    order = forest.dfs_leaf_order()
    w = leaf_weights(order, weights)
    prefix = exclusive_cumsum(w)
    return list(zip(order, prefix.tolist()))


def partition_serial(forest: RefinementForest, weights: Mapping[int, float] | None, p: int) -> PartitionAssignment:
    order = forest.dfs_leaf_order()
    w = leaf_weights(order, weights)
    total = w.sum()
    _check(p, total)
    prefix = exclusive_cumsum(w)
    return PartitionAssignment.from_arrays(order, interval_parts(prefix, total, p), p)


def partition_scanned(
    forest: RefinementForest,
    weights: Mapping[int, float] | None,
    p: int,
    ranks: Sequence[Sequence[int]],
) -> PartitionAssignment:
    """Refinement-tree partition computed the way ``v = len(ranks)`` ranks
    would, each owning one contiguous slice of the DFS leaf order.

    1. every rank sums its local leaf weights;
    2. an exclusive scan hands rank ``r`` the total of ranks ``< r``;
    3. every rank continues the running sum over its own leaves and applies
       the interval rule.

    With integer weights the result is identical to :func:`partition_serial`.
    """
    order = forest.dfs_leaf_order()
    flat = [e for block in ranks for e in block]
    if flat != order:
        raise InvalidArgumentError("rank blocks must cover the DFS leaf order contiguously and in order")
    w_all = leaf_weights(order, weights)

    bounds = np.cumsum([0] + [len(b) for b in ranks])
    local = [w_all[bounds[r] : bounds[r + 1]] for r in range(len(ranks))]
    local_totals = [blk.sum() for blk in local]
    offsets = scan_emulate(local_totals)
    total = offsets[-1] + local_totals[-1] if local_totals else 0
    _check(p, total)

    parts = []
    for off, blk in zip(offsets, local):
        prefix = off + exclusive_cumsum(blk)
        parts.append(interval_parts(prefix, total, p))
    parts = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return PartitionAssignment.from_arrays(order, parts, p)


def blocks_of(order: Sequence[int], sizes: Sequence[int]) -> list[list[int]]:
    """Cut ``order`` into consecutive blocks of the given sizes."""
    if sum(sizes) != len(order):
        raise InvalidArgumentError("block sizes must add up to the number of leaves")
    out, start = [], 0
    for s in sizes:
        out.append(list(order[start : start + s]))
        start += s
    return out
