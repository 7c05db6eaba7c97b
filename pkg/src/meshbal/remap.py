"""Subgrid-to-process remapping.

After repartitioning, new subgrid ``j`` may be placed on any process.  The
similarity matrix ``S[i, j]`` holds the weight that old part ``i`` owns and
new subgrid ``j`` needs.  A placement is a permutation ``perm`` with subgrid
``j`` going to process ``perm[j]``; the weight that stays put is
``F = sum_j S[perm[j], j]`` and the weight that moves is ``TotalV = sum(S) - F``.

:func:`remap_greedy` takes the largest entries first,
guarded so it never does worse than leaving the labels alone.
:func:`remap_exact` solves the assignment problem and serves as a reference.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgumentError, UnsupportedError
from .rtree import PartitionAssignment, as_exact

EXACT_MAX_P = 10


def build_similarity(
    old: PartitionAssignment,
    new: PartitionAssignment,
    weights: Mapping[int, float] | None = None,
) -> np.ndarray:
    """``p_old x p`` matrix of weight moving from old part ``i`` to new subgrid ``j``.

    Rows are accumulated one old part at a time, in ascending part order.
    """
    if old.part_of.keys() != new.part_of.keys():
        raise InvalidArgumentError("old and new assignments cover different elements")
    ids = sorted(new.part_of)
    w = np.ones(len(ids), dtype=np.int64) if weights is None else as_exact([weights[e] for e in ids])
    rows = old.parts(ids)
    cols = new.parts(ids)
    S = np.zeros((old.p, new.p), dtype=w.dtype)
    for i in range(old.p):
        mine = rows == i
        S[i] = np.bincount(cols[mine], weights=w[mine], minlength=new.p).astype(w.dtype)
    return S


def _check_perm(S: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    p = S.shape[1]
    if perm.shape != (p,) or sorted(perm.tolist()) != list(range(p)):
        raise InvalidArgumentError(f"not a permutation of 0..{p - 1}: {perm.tolist()}")
    if S.shape[0] != p:
        raise InvalidArgumentError(f"similarity matrix must be square, got {S.shape}")
    return perm


def cost_F(S, perm: Sequence[int]):
    """Weight retained on its process: ``sum_j S[perm[j], j]``."""
    S = np.asarray(S)
    perm = _check_perm(S, perm)
    return S[perm, np.arange(len(perm))].sum().item()


def migration_stats(S, perm: Sequence[int]) -> tuple:
    """``(TotalV, MaxV)`` for placing subgrid ``j`` on process ``perm[j]``.

    ``MaxV`` is the largest ``send + recv`` over processes, where a process
    sends what its old part loses and receives what its new subgrid gains.
    """
    S = np.asarray(S)
    perm = _check_perm(S, perm)
    cols = np.arange(len(perm))
    kept = np.zeros(len(perm), dtype=S.dtype)
    kept[perm] = S[perm, cols]
    send = S.sum(axis=1) - kept
    recv = np.zeros(len(perm), dtype=S.dtype)
    recv[perm] = S.sum(axis=0) - S[perm, cols]
    totalv = S.sum() - kept.sum()
    return totalv.item(), (send + recv).max().item()


def remap_greedy(S) -> np.ndarray:
    """Placement ``perm`` (subgrid ``j`` -> process ``perm[j]``).

    Entries are taken by decreasing ``S[i, j]`` (ties: lower ``i``, then lower
    ``j``) whenever both old part ``i`` and subgrid ``j`` are still free.
    Leftovers pair up in ascending order.  The identity is returned instead if
    it keeps strictly more weight.
    """
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError(f"similarity matrix must be square, got shape {S.shape}")
    if np.any(S < 0):
        raise InvalidArgumentError("similarity entries must be nonnegative")
    p = S.shape[0]
    ii, jj = np.divmod(np.arange(p * p), p)
    order = np.lexsort((jj, ii, -S.ravel()))
    perm = np.full(p, -1, dtype=np.int64)
    row_used = np.zeros(p, dtype=bool)
    for flat in order:
        i, j = ii[flat], jj[flat]
        if not row_used[i] and perm[j] < 0:
            perm[j] = i
            row_used[i] = True
    free_rows = iter(np.flatnonzero(~row_used))
    for j in np.flatnonzero(perm < 0):
        perm[j] = next(free_rows)

    identity = np.arange(p)
    if cost_F(S, identity) > cost_F(S, perm):
        return identity
    return perm


def remap_exact(S) -> np.ndarray:
    """An ``F``-maximizing placement (Hungarian assignment), ``p <= 10``."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError(f"similarity matrix must be square, got shape {S.shape}")
    p = S.shape[0]
    if p > EXACT_MAX_P:
        raise UnsupportedError(f"exact remapping is limited to p <= {EXACT_MAX_P}, got {p}")
    rows, cols = linear_sum_assignment(S, maximize=True)
    perm = np.empty(p, dtype=np.int64)
    perm[cols] = rows
    return perm

