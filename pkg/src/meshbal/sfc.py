"""Space-filling-curve keys for mesh elements.

Coordinates are first mapped into the unit cube, either keeping the domain's
shape (every axis divided by the largest bounding-box extent) or stretching
each axis independently.  Each unit coordinate is quantized to ``m`` bits per
axis and turned into a ``3m``-bit key along a Morton (bit interleaving) or
Hilbert curve.

Morton keys put the x bit highest within each level: ``(x<<2)|(y<<1)|z``.

Hilbert keys come from a table-driven octant state machine.  A state is a
symmetry of the cube (axis permutation plus reflections) telling how the
local copy of the curve sits inside the current octant.  The tables below
are frozen output of :func:`derive_hilbert_tables`.  It takes the order-1
curve (octants in binary-reflected Gray code order) and picks, for each of
the 8 sub-curves, a cube symmetry so that the curve enters at the origin,
leaves at corner ``(1, 0, 0)`` and steps between face-adjacent cells at
every octant seam.  The first valid choice needing only 12 states is kept.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .mesh import BBox, TetMesh

DEFAULT_ORDER = 21
MAX_ORDER = 21


class NormalizeMode(enum.Enum):
    PRESERVE_ASPECT = "preserve"
    STRETCH_TO_UNIT = "stretch"


class CurveKind(enum.Enum):
    MORTON = "morton"
    HILBERT = "hilbert"


def _check_order(order: int) -> int:
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise InvalidArgumentError(f"curve order must be in [1, {MAX_ORDER}], got {order}")
    return int(order)


def normalize(points, bbox: BBox, mode: NormalizeMode, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Map points of ``bbox`` into ``[0, 1 - 2**-(order+1)]**3``."""
    order = _check_order(order)
    mode = NormalizeMode(mode)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    origin = np.asarray(bbox.origin, dtype=float)
    lengths = np.asarray(bbox.lengths, dtype=float)
    if np.any(lengths < 0):
        raise InvalidArgumentError(f"bounding box lengths must be >= 0, got {bbox.lengths}")
    longest = lengths.max()
    if longest == 0:
        raise DegenerateInputError("bounding box has zero extent on every axis")

    tol = 1e-12 * longest
    if np.any(pts < origin - tol) or np.any(pts > origin + lengths + tol):
        raise InvalidArgumentError("point outside the bounding box")

    if mode is NormalizeMode.PRESERVE_ASPECT:
        scale = np.full(3, longest)
    else:
        # a flat axis has nothing to stretch; it maps to 0
        scale = np.where(lengths > 0, lengths, 1.0)
    unit = (pts - origin) / scale
    return np.clip(unit, 0.0, 1.0 - 2.0 ** -(order + 1))


def quantize(coords, order: int) -> np.ndarray:
    """``floor(c * 2**order)`` per axis as uint64."""
    c = np.asarray(coords, dtype=float).reshape(-1, 3)
    if np.any(~np.isfinite(c)) or np.any(c < 0) or np.any(c >= 1):
        raise InvalidArgumentError("unit coordinates must lie in [0, 1)")
    return np.floor(c * float(2**order)).astype(np.uint64)


# -- Morton -------------------------------------------------------------------


def morton_keys(coords, order: int = DEFAULT_ORDER) -> np.ndarray:
    order = _check_order(order)
    cells = quantize(coords, order)
    key = np.zeros(len(cells), dtype=np.uint64)
    one = np.uint64(1)
    for level in range(order - 1, -1, -1):
        s = np.uint64(level)
        octant = (
            (((cells[:, 0] >> s) & one) << np.uint64(2))
            | (((cells[:, 1] >> s) & one) << one)
            | ((cells[:, 2] >> s) & one)
        )
        key = (key << np.uint64(3)) | octant
    return key


def morton_key(coord, order: int = DEFAULT_ORDER) -> int:
    return int(morton_keys([coord], order)[0])


# -- Hilbert state tables ------------------------------------------------------

# a cube symmetry acts on octant bits b = (bx, by, bz): out[a] = b[perm[a]] ^ flip[a]
_SYMMETRIES = [(perm, flip) for perm in itertools.permutations(range(3)) for flip in itertools.product((0, 1), repeat=3)]


def _apply(t, bits):
    perm, flip = t
    return tuple(bits[perm[a]] ^ flip[a] for a in range(3))


def _compose(t1, t2):
    """Symmetry equal to applying ``t2`` first, then ``t1``."""
    p1, f1 = t1
    p2, f2 = t2
    perm = tuple(p2[p1[a]] for a in range(3))
    flip = tuple(f2[p1[a]] ^ f1[a] for a in range(3))
    return perm, flip


def _bits(o: int) -> tuple[int, int, int]:
    return (o >> 2) & 1, (o >> 1) & 1, o & 1


def _octant(bits) -> int:
    return (bits[0] << 2) | (bits[1] << 1) | bits[2]


_IDENTITY = ((0, 1, 2), (0, 0, 0))
_BASE = [_bits(i ^ (i >> 1)) for i in range(8)]
_ENTRY, _EXIT = (0, 0, 0), (1, 0, 0)


def _subcurve_choices():
    """Per-octant symmetry sequences giving a continuous curve, in a fixed
    enumeration order."""

    def extend(i, prev_exit, chosen):
        if i == 8:
            yield list(chosen)
            return
        here = _BASE[i]
        for t in _SYMMETRIES:
            entry, exit_ = _apply(t, _ENTRY), _apply(t, _EXIT)
            if i == 0 and entry != _ENTRY:
                continue
            if i > 0:
                # exit cell of the previous sub-curve and entry cell of this
                # one must be face neighbours on the order-2 grid
                prev = _BASE[i - 1]
                d = sum(abs((2 * prev[a] + prev_exit[a]) - (2 * here[a] + entry[a])) for a in range(3))
                if d != 1:
                    continue
            if i == 7 and exit_ != _EXIT:
                continue
            chosen.append(t)
            yield from extend(i + 1, exit_, chosen)
            chosen.pop()

    return extend(0, None, [])


def _closure(subs):
    states = [_IDENTITY]
    index = {_IDENTITY: 0}
    k = 0
    while k < len(states):
        s = states[k]
        for t in subs:
            nxt = _compose(s, t)
            if nxt not in index:
                index[nxt] = len(states)
                states.append(nxt)
        k += 1
    return states, index


# fewest orientations any 3D Hilbert curve needs
_MIN_STATES = 12


def derive_hilbert_tables():
    """Rebuild the Hilbert tables from the order-1 curve (slow: ~0.5 s)."""
    for subs in _subcurve_choices():
        states, index = _closure(subs)
        if len(states) == _MIN_STATES:
            break
    else:  # pragma: no cover
        raise RuntimeError("no 12-state Hilbert construction found")
    n = len(states)
    # position along the curve and next state, per (state, global octant)
    pos = np.zeros((n, 8), dtype=np.uint64)
    nxt = np.zeros((n, 8), dtype=np.int64)
    for s, t in enumerate(states):
        for i in range(8):
            o = _octant(_apply(t, _BASE[i]))
            pos[s, o] = i
            nxt[s, o] = index[_compose(t, subs[i])]
    return pos, nxt


# output of derive_hilbert_tables(), frozen; rows are states, columns the
# global octant (x<<2)|(y<<1)|z
HILBERT_POSITION = np.array(
    [
        [0, 1, 3, 2, 7, 6, 4, 5],
        [0, 7, 1, 6, 3, 4, 2, 5],
        [0, 3, 7, 4, 1, 2, 6, 5],
        [4, 3, 5, 2, 7, 0, 6, 1],
        [6, 5, 1, 2, 7, 4, 0, 3],
        [4, 7, 3, 0, 5, 6, 2, 1],
        [6, 7, 5, 4, 1, 0, 2, 3],
        [4, 5, 7, 6, 3, 2, 0, 1],
        [6, 1, 7, 0, 5, 2, 4, 3],
        [2, 1, 5, 6, 3, 0, 4, 7],
        [2, 5, 3, 4, 1, 6, 0, 7],
        [2, 3, 1, 0, 5, 4, 6, 7],
    ],
    dtype=np.uint64,
)
HILBERT_NEXT_STATE = np.array(
    [
        [1, 2, 3, 0, 3, 4, 1, 0],
        [2, 5, 0, 6, 5, 2, 1, 1],
        [0, 7, 7, 0, 1, 2, 8, 2],
        [9, 4, 3, 3, 4, 9, 0, 6],
        [3, 4, 10, 4, 0, 7, 7, 0],
        [11, 6, 6, 11, 5, 1, 5, 8],
        [5, 1, 6, 3, 9, 3, 6, 1],
        [10, 7, 8, 2, 8, 7, 10, 4],
        [7, 11, 2, 5, 8, 8, 5, 2],
        [9, 3, 9, 10, 11, 6, 6, 11],
        [10, 10, 9, 4, 7, 11, 4, 9],
        [11, 10, 5, 8, 11, 8, 9, 10],
    ],
    dtype=np.int64,
)


def hilbert_keys(coords, order: int = DEFAULT_ORDER) -> np.ndarray:
    order = _check_order(order)
    cells = quantize(coords, order)
    key = np.zeros(len(cells), dtype=np.uint64)
    state = np.zeros(len(cells), dtype=np.int64)
    one = np.uint64(1)
    for level in range(order - 1, -1, -1):
        s = np.uint64(level)
        octant = (
            (((cells[:, 0] >> s) & one) << np.uint64(2))
            | (((cells[:, 1] >> s) & one) << one)
            | ((cells[:, 2] >> s) & one)
        ).astype(np.int64)
        key = (key << np.uint64(3)) | HILBERT_POSITION[state, octant]
        state = HILBERT_NEXT_STATE[state, octant]
    return key


def hilbert_key(coord, order: int = DEFAULT_ORDER) -> int:
    return int(hilbert_keys([coord], order)[0])


_KEY_FUNCS = {CurveKind.MORTON: morton_keys, CurveKind.HILBERT: hilbert_keys}


def curve_keys(coords, kind: CurveKind, order: int = DEFAULT_ORDER) -> np.ndarray:
    return _KEY_FUNCS[CurveKind(kind)](coords, order)


_CHUNK = 1 << 15


def element_keys(
    mesh: TetMesh,
    mode: NormalizeMode = NormalizeMode.PRESERVE_ASPECT,
    kind: CurveKind = CurveKind.HILBERT,
    order: int = DEFAULT_ORDER,
    workers: int = 1,
) -> list[tuple[int, int, float]]:
    """``(element_id, key, weight)`` for every live element, ascending id.

    Elements are keyed by their barycenter.  Keys are computed in fixed
    chunks so the output does not depend on ``workers``.
    """
    ids = mesh.element_ids()
    if not ids:
        raise InvalidArgumentError("mesh has no live elements")
    unit = normalize(mesh.barycenters(ids), mesh.bbox, mode, order)
    chunks = [unit[i : i + _CHUNK] for i in range(0, len(unit), _CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: curve_keys(c, kind, order), chunks))
    else:
        parts = [curve_keys(c, kind, order) for c in chunks]
    keys = np.concatenate(parts)
    return [(e, int(k), mesh.element(e).weight) for e, k in zip(ids, keys.tolist())]


def key_fraction(keys: Sequence[int], order: int) -> np.ndarray:
    """Keys as reals in ``[0, 1)``.

    Order is preserved up to ties: keys closer than float spacing collapse,
    and the very top keys, which would round to 1.0, are pulled just below.
    """
    frac = np.asarray(keys, dtype=np.uint64).astype(float) / float(2 ** (3 * order))
    return np.minimum(frac, np.nextafter(1.0, 0.0))
