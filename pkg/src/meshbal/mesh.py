"""Tetrahedral meshes with bisection refinement and coarsening.

A :class:`TetMesh` keeps every element it has ever created that is still
reachable (live leaves plus their refined ancestors), a map from each
triangular face to the live elements incident on it, and an append-only
event log of bisections and coarsenings.  The refinement forest in
:mod:`meshbal.rtree` is kept in sync by replaying that log.

Refinement is longest-edge bisection with the new vertex at the edge
midpoint.  Midpoint vertices are shared between neighbours that cut the same
edge, so faces match whenever both sides refine compatibly; hanging nodes are
otherwise allowed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InvalidArgumentError,
    MeshParseError,
    NotFoundError,
    PreconditionError,
)

FaceKey = tuple[int, int, int]

# the four faces of a tet, as positions into its vertex tuple
_FACE_POS = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
_EDGE_POS = tuple(itertools.combinations(range(4), 2))
# relative tolerance for treating two edges as equally long
_EDGE_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise InvalidArgumentError(f"non-finite coordinate in {self!r}")

    def __iter__(self):
        return iter((self.x, self.y, self.z))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box given by its minimum corner and per-axis lengths."""

    origin: tuple[float, float, float]
    lengths: tuple[float, float, float]

    @classmethod
    def of_points(cls, points) -> "BBox":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise InvalidArgumentError("bounding box of an empty point set")
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return cls(tuple(map(float, lo)), tuple(map(float, hi - lo)))

    @property
    def upper(self) -> tuple[float, float, float]:
        return tuple(o + l for o, l in zip(self.origin, self.lengths))


@dataclass
class Tet:
    element_id: int
    vertices: tuple[int, int, int, int]
    weight: float = 1.0
    parent: int | None = None

    @property
    def tree_node(self) -> int:
        # forest nodes share ids with the elements they stand for
        return self.element_id


@dataclass(frozen=True)
class BisectionEvent:
    parent: int
    left_child: int
    right_child: int
    cut_edge: tuple[int, int]
    new_vertex: int


@dataclass(frozen=True)
class CoarsenEvent:
    parent: int
    left_child: int
    right_child: int


def _face_keys(verts: Sequence[int]) -> list[FaceKey]:
    return [tuple(sorted((verts[a], verts[b], verts[c]))) for a, b, c in _FACE_POS]


def _signed_volume(p0, p1, p2, p3) -> float:
    a = (p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2])
    b = (p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2])
    c = (p3[0] - p0[0], p3[1] - p0[1], p3[2] - p0[2])
    det = (
        a[0] * (b[1] * c[2] - b[2] * c[1])
        - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
    )
    return det / 6.0


class TetMesh:
    """Mutable tetrahedral mesh.

    Args:
        vertices: ``(nv, 3)`` coordinates.
        tets: ``(nt, 4)`` vertex indices per element.  Elements get ids
            ``0 .. nt-1`` in input order.  Negatively oriented elements are
            reoriented by swapping their last two vertices.
        weights: optional per-element weights (default 1.0).
    """

    def __init__(self, vertices, tets, weights=None):
        coords = np.asarray(vertices, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(coords)):
            raise InvalidArgumentError("vertex coordinates must be finite")
        cells = np.asarray(tets, dtype=np.int64).reshape(-1, 4)
        if weights is None:
            weights = np.ones(len(cells))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(cells),):
            raise InvalidArgumentError("one weight per tetrahedron expected")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidArgumentError("weights must be finite and nonnegative")

        self._coords: list[tuple[float, float, float]] = [tuple(map(float, p)) for p in coords]
        self._coord_cache: np.ndarray | None = None
        self._elements: dict[int, Tet] = {}
        self._live: set[int] = set()
        self._children: dict[int, tuple[int, int]] = {}
        self._midpoints: dict[tuple[int, int], int] = {}
        self.faces: dict[FaceKey, list[int]] = {}
        self.events: list[BisectionEvent | CoarsenEvent] = []
        self.version = 0
        self._ids_cache: tuple[int, list[int]] | None = None
        self._pairs_cache: tuple[int, np.ndarray] | None = None

        nv = len(self._coords)
        for eid, (verts, w) in enumerate(zip(cells.tolist(), weights.tolist())):
            if len(set(verts)) != 4:
                raise InvalidArgumentError(f"tet {eid} has repeated vertices {verts}")
            if min(verts) < 0 or max(verts) >= nv:
                raise InvalidArgumentError(f"tet {eid} references a vertex outside [0, {nv})")
            vol = _signed_volume(*(self._coords[v] for v in verts))
            if vol == 0.0:
                raise InvalidArgumentError(f"tet {eid} is degenerate (zero volume)")
            if vol < 0:
                verts = [verts[0], verts[1], verts[3], verts[2]]
            self._elements[eid] = Tet(eid, tuple(verts), float(w))
            self._live.add(eid)
            self._add_faces(eid)
        self.root_ids: tuple[int, ...] = tuple(range(len(cells)))
        self._next_id = len(cells)

    # -- queries ---------------------------------------------------------

    @property
    def coords(self) -> np.ndarray:
        if self._coord_cache is None or len(self._coord_cache) != len(self._coords):
            self._coord_cache = np.array(self._coords, dtype=float).reshape(-1, 3)
        return self._coord_cache

    @property
    def vertices(self) -> list[Point3]:
        return [Point3(*p) for p in self._coords]

    @property
    def num_vertices(self) -> int:
        return len(self._coords)

    @property
    def tets(self) -> dict[int, Tet]:
        """Live elements keyed by element id, in ascending id order."""
        return {eid: self._elements[eid] for eid in self.element_ids()}

    def __len__(self) -> int:
        return len(self._live)

    def __contains__(self, eid) -> bool:
        return eid in self._live

    def element(self, eid: int) -> Tet:
        try:
            return self._elements[eid]
        except KeyError:
            raise NotFoundError(f"unknown element {eid}") from None

    def element_ids(self) -> list[int]:
        """Live element ids, ascending."""
        if self._ids_cache is None or self._ids_cache[0] != self.version:
            self._ids_cache = (self.version, sorted(self._live))
        return list(self._ids_cache[1])

    def children(self, eid: int) -> tuple[int, int] | None:
        return self._children.get(eid)

    def is_leaf(self, eid: int) -> bool:
        return eid in self._live

    @property
    def bbox(self) -> BBox:
        return BBox.of_points(self.coords)

    def volume(self, eid: int) -> float:
        tet = self.element(eid)
        return _signed_volume(*(self._coords[v] for v in tet.vertices))

    def volumes(self, eids: Iterable[int] | None = None) -> np.ndarray:
        if eids is None:
            eids = self.element_ids()
        idx = np.array([self._elements[e].vertices for e in eids], dtype=np.int64).reshape(-1, 4)
        p = self.coords[idx]
        d = p[:, 1:] - p[:, :1]
        return np.linalg.det(d) / 6.0

    def total_volume(self) -> float:
        return math.fsum(self.volume(eid) for eid in self.element_ids())

    def weights(self) -> dict[int, float]:
        return {eid: self._elements[eid].weight for eid in self.element_ids()}

    def set_weight(self, eid: int, weight: float) -> None:
        if eid not in self._live:
            raise NotFoundError(f"element {eid} is not live")
        if not (weight >= 0 and math.isfinite(weight)):
            raise InvalidArgumentError(f"weight must be finite and >= 0, got {weight}")
        self._elements[eid].weight = float(weight)

    def barycenters(self, eids: Iterable[int] | None = None) -> np.ndarray:
        if eids is None:
            eids = self.element_ids()
        idx = np.array([self._elements[e].vertices for e in eids], dtype=np.int64).reshape(-1, 4)
        return self.coords[idx].mean(axis=1)

    def interior_faces(self) -> list[tuple[int, int]]:
        return sorted(tuple(inc) for inc in self.faces.values() if len(inc) == 2)

    def interior_pairs(self) -> np.ndarray:
        """Interior faces as an ``(nf, 2)`` int array, cached per mesh version."""
        if self._pairs_cache is None or self._pairs_cache[0] != self.version:
            pairs = self.interior_faces()
            self._pairs_cache = (self.version, np.array(pairs, dtype=np.int64).reshape(-1, 2))
        return self._pairs_cache[1]

    def recompute_faces(self) -> dict[FaceKey, list[int]]:
        """Face map rebuilt from the live elements alone."""
        faces: dict[FaceKey, list[int]] = {}
        for eid in self.element_ids():
            for key in _face_keys(self._elements[eid].vertices):
                faces.setdefault(key, []).append(eid)
        return {k: sorted(v) for k, v in faces.items()}

    # -- mutation --------------------------------------------------------

    def _add_faces(self, eid: int) -> None:
        for key in _face_keys(self._elements[eid].vertices):
            inc = self.faces.setdefault(key, [])
            inc.append(eid)
            inc.sort()

    def _remove_faces(self, eid: int) -> None:
        for key in _face_keys(self._elements[eid].vertices):
            inc = self.faces[key]
            inc.remove(eid)
            if not inc:
                del self.faces[key]

    def _midpoint(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        idx = self._midpoints.get(key)
        if idx is None:
            pa, pb = self._coords[a], self._coords[b]
            self._coords.append(tuple((pa[k] + pb[k]) * 0.5 for k in range(3)))
            idx = len(self._coords) - 1
            self._midpoints[key] = idx
        return idx

    def cut_edge(self, eid: int) -> tuple[int, int]:
        """Edge chosen for bisection: the longest one, ties to the smallest
        ``(min index, max index)`` pair."""
        verts = self.element(eid).vertices
        cands = []
        for i, j in _EDGE_POS:
            pa, pb = self._coords[verts[i]], self._coords[verts[j]]
            l2 = (pa[0] - pb[0]) ** 2 + (pa[1] - pb[1]) ** 2 + (pa[2] - pb[2]) ** 2
            cands.append((l2, min(verts[i], verts[j]), max(verts[i], verts[j])))
        longest = max(c[0] for c in cands)
        _, a, b = min((c for c in cands if c[0] >= longest * (1 - _EDGE_TIE_RTOL)), key=lambda c: (c[1], c[2]))
        return a, b

    def bisect(self, eid: int) -> BisectionEvent:
        if eid not in self._live:
            raise NotFoundError(f"element {eid} is not a live leaf")
        parent = self._elements[eid]
        a, b = self.cut_edge(eid)
        m = self._midpoint(a, b)
        verts = parent.vertices
        # replacing one endpoint by the midpoint in place keeps the orientation
        left_verts = tuple(m if v == b else v for v in verts)
        right_verts = tuple(m if v == a else v for v in verts)
        left_id, right_id = self._next_id, self._next_id + 1
        self._next_id += 2

        self._remove_faces(eid)
        self._live.discard(eid)
        self._elements[left_id] = Tet(left_id, left_verts, parent.weight, eid)
        self._elements[right_id] = Tet(right_id, right_verts, parent.weight, eid)
        self._live.update((left_id, right_id))
        self._add_faces(left_id)
        self._add_faces(right_id)
        self._children[eid] = (left_id, right_id)

        event = BisectionEvent(eid, left_id, right_id, (a, b), m)
        self.events.append(event)
        self.version += 1
        return event

    def coarsen(self, parent_id: int) -> CoarsenEvent:
        if parent_id not in self._elements:
            raise NotFoundError(f"unknown element {parent_id}")
        kids = self._children.get(parent_id)
        if kids is None:
            raise PreconditionError(f"element {parent_id} has no children to coarsen")
        if not all(k in self._live for k in kids):
            raise PreconditionError(f"children {kids} of {parent_id} are not both live leaves")
        for k in kids:
            self._remove_faces(k)
            self._live.discard(k)
            del self._elements[k]
        del self._children[parent_id]
        self._live.add(parent_id)
        self._add_faces(parent_id)

        event = CoarsenEvent(parent_id, kids[0], kids[1])
        self.events.append(event)
        self.version += 1
        return event

    def coarsenable(self) -> list[int]:
        """Parents whose two children are both live leaves, ascending."""
        return sorted(p for p, kids in self._children.items() if kids[0] in self._live and kids[1] in self._live)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TetMesh):
            return NotImplemented
        return (
            self._coords == other._coords
            and self.element_ids() == other.element_ids()
            and all(
                self._elements[e].vertices == other._elements[e].vertices
                and self._elements[e].weight == other._elements[e].weight
                for e in self.element_ids()
            )
        )

    __hash__ = None


def generate_box_mesh(nx: int, ny: int, nz: int, dims=(1.0, 1.0, 1.0)) -> TetMesh:
    """Structured tetrahedral mesh of ``[0,dx]x[0,dy]x[0,dz]``.

    Vertices are numbered x fastest, then y, then z.  Each grid cell is split
    into the six Kuhn tetrahedra around its main diagonal: for every ordering
    ``(a, b, c)`` of the axes (in ``itertools.permutations`` order) the tet
    walks ``v000 -> v000+e_a -> v000+e_a+e_b -> v111``.  All cells use the same
    diagonal direction, so the mesh is conforming.
    """
    for n in (nx, ny, nz):
        if int(n) != n or n < 1:
            raise InvalidArgumentError(f"cell counts must be positive integers, got {(nx, ny, nz)}")
    dims = tuple(float(d) for d in dims)
    if len(dims) != 3 or not all(d > 0 and math.isfinite(d) for d in dims):
        raise InvalidArgumentError(f"box dimensions must be positive, got {dims}")
    nx, ny, nz = int(nx), int(ny), int(nz)

    xs = [dims[0] * i / nx for i in range(nx + 1)]
    ys = [dims[1] * j / ny for j in range(ny + 1)]
    zs = [dims[2] * k / nz for k in range(nz + 1)]
    verts = [(x, y, z) for z in zs for y in ys for x in xs]

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    tets = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                for perm in itertools.permutations(range(3)):
                    corner = [0, 0, 0]
                    path = [vid(i, j, k)]
                    for axis in perm:
                        corner[axis] = 1
                        path.append(vid(i + corner[0], j + corner[1], k + corner[2]))
                    tets.append(path)
    return TetMesh(verts, tets)


def interior_faces(mesh: TetMesh) -> list[tuple[int, int]]:
    """One ``(a, b)`` pair with ``a < b`` per face shared by two live elements."""
    return mesh.interior_faces()


def bisect(mesh: TetMesh, element_id: int) -> BisectionEvent:
    return mesh.bisect(element_id)


def coarsen(mesh: TetMesh, parent_id: int) -> CoarsenEvent:
    return mesh.coarsen(parent_id)


# -- tetmesh v1 text format ---------------------------------------------------

_HEADER = "tetmesh v1"


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_mesh(text: str, path=None) -> TetMesh:
    lines = _content_lines(text)
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise MeshParseError("missing header", 1, path) from None
    if line != _HEADER:
        raise MeshParseError(f"expected header {_HEADER!r}, got {line!r}", lineno, path)

    try:
        lineno, line = next(lines)
    except StopIteration:
        raise MeshParseError("missing counts line", lineno + 1, path) from None
    fields = line.split()
    try:
        nv, nt = (int(f) for f in fields)
    except ValueError:
        raise MeshParseError(f"expected '<nv> <nt>', got {line!r}", lineno, path) from None
    if nv < 0 or nt < 0:
        raise MeshParseError("counts must be nonnegative", lineno, path)

    last = lineno
    verts = []
    for _ in range(nv):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshParseError(f"vertex count mismatch: header says {nv}, found {len(verts)}", last + 1, path) from None
        last = lineno
        fields = line.split()
        if len(fields) != 3:
            raise MeshParseError(f"expected 3 coordinates, got {len(fields)}", lineno, path)
        try:
            xyz = [float(f) for f in fields]
        except ValueError:
            raise MeshParseError(f"bad coordinate in {line!r}", lineno, path) from None
        if not all(math.isfinite(c) for c in xyz):
            raise MeshParseError("non-finite coordinate", lineno, path)
        verts.append(xyz)

    tets, weights = [], []
    for _ in range(nt):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshParseError(f"tet count mismatch: header says {nt}, found {len(tets)}", last + 1, path) from None
        last = lineno
        fields = line.split()
        if len(fields) != 5:
            raise MeshParseError(f"expected 'v0 v1 v2 v3 weight', got {line!r}", lineno, path)
        try:
            idx = [int(f) for f in fields[:4]]
            w = float(fields[4])
        except ValueError:
            raise MeshParseError(f"bad tet line {line!r}", lineno, path) from None
        if any(v < 0 or v >= nv for v in idx):
            raise MeshParseError(f"vertex index out of range [0, {nv})", lineno, path)
        if not (math.isfinite(w) and w >= 0):
            raise MeshParseError(f"weight must be finite and >= 0, got {fields[4]}", lineno, path)
        tets.append(idx)
        weights.append(w)

    extra = next(lines, None)
    if extra is not None:
        raise MeshParseError("trailing content after the last tet", extra[0], path)
    try:
        return TetMesh(np.array(verts).reshape(-1, 3), np.array(tets, dtype=np.int64).reshape(-1, 4), weights)
    except InvalidArgumentError as exc:
        raise MeshParseError(str(exc), None, path) from None


def load_mesh(path: str | PathLike) -> TetMesh:
    with open(path, encoding="utf-8") as fh:
        return parse_mesh(fh.read(), path)


def format_mesh(mesh: TetMesh) -> str:
    out = [_HEADER]
    ids = mesh.element_ids()
    out.append(f"{mesh.num_vertices} {len(ids)}")
    for x, y, z in mesh._coords:
        out.append(f"{x:.17g} {y:.17g} {z:.17g}")
    for eid in ids:
        t = mesh.element(eid)
        out.append(" ".join(str(v) for v in t.vertices) + f" {t.weight:.17g}")
    return "\n".join(out) + "\n"


def save_mesh(mesh: TetMesh, path: str | PathLike) -> None:
    """Write the live elements (ascending id) in ``tetmesh v1`` format.

    Refinement history is not stored; the loaded mesh numbers its elements
    ``0 .. nt-1``.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mesh(mesh))
