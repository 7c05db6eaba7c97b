"""Structural partition quality: load imbalance, interface faces, migration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError
from .mesh import TetMesh
from .remap import build_similarity, migration_stats
from .rtree import PartitionAssignment, RefinementForest, as_exact


@dataclass(frozen=True)
class QualityReport:
    p: int
    part_weights: list
    imbalance: float
    interface_faces: int
    totalv: float
    maxv: float
    migration_fraction: float
    dfs_face_share_rate: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def _weights(ids, weights):
    if weights is None:
        return np.ones(len(ids), dtype=np.int64)
    return as_exact([weights[e] for e in ids])


def part_weights(mesh: TetMesh, assignment: PartitionAssignment, weights: Mapping[int, float] | None = None) -> np.ndarray:
    ids = mesh.element_ids()
    w = _weights(ids, weights)
    totals = np.bincount(assignment.parts(ids), weights=w, minlength=assignment.p)
    return totals.astype(w.dtype)


def imbalance(mesh: TetMesh, assignment: PartitionAssignment, weights: Mapping[int, float] | None = None, p: int | None = None) -> float:
    """``max part weight / (W / p)``; 1 is perfect balance."""
    p = assignment.p if p is None else p
    totals = part_weights(mesh, assignment, weights)
    total = totals.sum()
    if total <= 0:
        raise DegenerateInputError("total element weight is zero")
    return float(totals.max() * p / total)


def edge_cut(mesh: TetMesh, assignment: PartitionAssignment) -> int:
    """Interior faces whose two elements sit in different parts."""
    pairs = mesh.interior_pairs()
    if len(pairs) == 0:
        return 0
    part = assignment.part_of
    a = np.fromiter((part[e] for e in pairs[:, 0]), dtype=np.int64, count=len(pairs))
    b = np.fromiter((part[e] for e in pairs[:, 1]), dtype=np.int64, count=len(pairs))
    return int(np.count_nonzero(a != b))


def dfs_face_share_rate(mesh: TetMesh, order: Sequence[int]) -> float:
    """Fraction of consecutive leaves in ``order`` that share a whole face."""
    if len(order) < 2:
        return 1.0
    shared = {tuple(pair) for pair in mesh.interior_pairs().tolist()}
    hits = sum(1 for a, b in zip(order, order[1:]) if (min(a, b), max(a, b)) in shared)
    return hits / (len(order) - 1)


def quality_report(
    mesh: TetMesh,
    old_assignment: PartitionAssignment | None,
    new_assignment: PartitionAssignment,
    perm: Sequence[int] | None = None,
    weights: Mapping[int, float] | None = None,
    p: int | None = None,
    forest: RefinementForest | None = None,
) -> QualityReport:
    """All quality figures for one partition.

    ``new_assignment`` holds subgrid labels; ``perm[j]`` is the process that
    hosts subgrid ``j`` (identity when omitted).  Migration fields are zero
    without an ``old_assignment``.
    """
    p = new_assignment.p if p is None else p
    totals = part_weights(mesh, new_assignment, weights)
    if old_assignment is not None:
        S = build_similarity(old_assignment, new_assignment, weights)
        perm = np.arange(new_assignment.p) if perm is None else perm
        totalv, maxv = migration_stats(S, perm)
        moved = totalv / S.sum() if S.sum() > 0 else 0.0
    else:
        totalv, maxv, moved = 0, 0, 0.0
    if forest is None:
        forest = RefinementForest.from_mesh(mesh)
    return QualityReport(
        p=int(p),
        part_weights=totals.tolist(),
        imbalance=imbalance(mesh, new_assignment, weights, p),
        interface_faces=edge_cut(mesh, new_assignment),
        totalv=totalv,
        maxv=maxv,
        migration_fraction=float(moved),
        dfs_face_share_rate=dfs_face_share_rate(mesh, forest.dfs_leaf_order()),
    )
