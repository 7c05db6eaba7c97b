"""Deterministic stand-ins for the MPI collectives the partitioners need."""

from __future__ import annotations

from typing import Sequence


def scan_emulate(values: Sequence) -> list:
    """Exclusive prefix scan over virtual ranks.

    Rank ``r`` receives ``sum(values[:r])``.  Summation runs left to right in
    rank order so float results do not depend on any internal parallelism.

    >>> scan_emulate([2, 3, 5])
    [0, 2, 5]
    """
    out = []
    acc = 0
    for v in values:
        out.append(acc)
        acc = acc + v
    return out


def split_even(n: int, v: int) -> list[int]:
    """Block sizes for ``n`` items over ``v`` ranks, larger blocks first."""
    if v < 1:
        raise ValueError(f"need at least one rank, got {v}")
    q, r = divmod(n, v)
    return [q + 1 if i < r else q for i in range(v)]
