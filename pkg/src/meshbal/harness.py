"""Simulated adaptive computation over virtual ranks.

Each step marks elements from an indicator field, refines and coarsens the
mesh, repartitions it with the chosen method, remaps the new subgrids onto
processes and records the resulting quality.  Everything is deterministic:
there is no real communication, and ties are broken by element id.

Marking score is ``indicator(barycenter) * volume**(1/3)``, a stand-in for a
local error estimate: refining an element shrinks its score, so the
refinement front follows the indicator instead of digging into one spot.
"""

from __future__ import annotations

import enum
import json
import math
import random
import time
from dataclasses import dataclass, field, fields, replace
from os import PathLike
from typing import Iterator

import numpy as np

from .errors import ConsistencyError, InvalidArgumentError, ScenarioError
from .mesh import TetMesh, generate_box_mesh, load_mesh
from .metrics import QualityReport, quality_report
from .part1d import partition_1d
from .remap import build_similarity, migration_stats, remap_greedy
from .rtree import PartitionAssignment, RefinementForest, blocks_of, partition_scanned, partition_serial
from .sfc import DEFAULT_ORDER, CurveKind, NormalizeMode, element_keys, key_fraction
from .vranks import scan_emulate, split_even

__all__ = [
    "Indicator",
    "Method",
    "Scenario",
    "StepRecord",
    "indicator_value",
    "iter_scenario",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "scan_emulate",
]


class Indicator(enum.Enum):
    UNIFORM = "uniform"
    MOVING_PEAK = "moving_peak"


class Method(enum.Enum):
    RTK = "rtk"
    MORTON = "morton"
    HILBERT = "hilbert"


_CURVE = {Method.MORTON: CurveKind.MORTON, Method.HILBERT: CurveKind.HILBERT}


def indicator_value(kind: Indicator, barycenter, t: float, params: dict | None = None) -> np.ndarray:
    """Indicator at one point (shape ``(3,)``) or many (``(n, 3)``).

    ``MOVING_PEAK`` is ``exp(1 / (25 r^2 + 0.9) - 2.5)`` with ``r`` the distance
    to ``(1/2 + (2/5) sin(8 pi t), 1/2 + (2/5) cos(8 pi t), 1)``.  ``params``
    may override ``center_z`` (default 1).
    """
    pts = np.asarray(barycenter, dtype=float)
    kind = Indicator(kind)
    if kind is Indicator.UNIFORM:
        return np.ones(pts.shape[:-1]) if pts.ndim > 1 else np.float64(1.0)
    cz = (params or {}).get("center_z", 1.0)
    center = np.array([0.5 + 0.4 * math.sin(8 * math.pi * t), 0.5 + 0.4 * math.cos(8 * math.pi * t), cz])
    r2 = np.sum((pts - center) ** 2, axis=-1)
    return np.exp(1.0 / (25.0 * r2 + 0.9) - 2.5)


@dataclass(frozen=True)
class Scenario:
    cells: tuple[int, int, int] = (4, 4, 4)
    dims: tuple[float, float, float] = (1.0, 1.0, 1.0)
    mesh_file: str | None = None
    indicator: Indicator = Indicator.MOVING_PEAK
    steps: int = 10
    refine_fraction: float = 0.05
    coarsen_fraction: float = 0.0
    p: int = 8
    method: Method = Method.RTK
    mode: NormalizeMode = NormalizeMode.PRESERVE_ASPECT
    order: int = DEFAULT_ORDER
    k: int = 4
    seed: int = 0
    # element weights are drawn from 1..max_weight per (seed, element id)
    max_weight: int = 1
    workers: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "indicator", Indicator(self.indicator))
            object.__setattr__(self, "method", Method(self.method))
            object.__setattr__(self, "mode", NormalizeMode(self.mode))
        except ValueError as exc:
            raise InvalidArgumentError(str(exc)) from None
        if self.steps < 1:
            raise InvalidArgumentError(f"steps must be >= 1, got {self.steps}")
        if self.p < 1:
            raise InvalidArgumentError(f"p must be >= 1, got {self.p}")
        if not 0 <= self.refine_fraction <= 1 or not 0 <= self.coarsen_fraction < 1:
            raise InvalidArgumentError("refine_fraction must be in [0, 1] and coarsen_fraction in [0, 1)")
        if self.refine_fraction + self.coarsen_fraction > 1:
            raise InvalidArgumentError("refine_fraction + coarsen_fraction must not exceed 1")
        if not 1 <= self.order <= 21 or self.k < 2 or self.max_weight < 1 or self.workers < 1:
            raise InvalidArgumentError("order in [1, 21], k >= 2, max_weight >= 1 and workers >= 1 required")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be nonnegative")


@dataclass(frozen=True)
class StepRecord:
    step: int
    element_count: int
    report: QualityReport
    identity_totalv: float
    partition_time: float = field(default=0.0, compare=False)
    remap_time: float = field(default=0.0, compare=False)

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "step": self.step,
            "element_count": self.element_count,
            "identity_totalv": self.identity_totalv,
            "report": self.report.to_dict(),
        }
        if timings:
            out["partition_time"] = self.partition_time
            out["remap_time"] = self.remap_time
        return out

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings))


# -- scenario files -----------------------------------------------------------

_TUPLE_INT = {"cells"}
_TUPLE_FLOAT = {"dims"}


def parse_scenario(text: str, **overrides) -> Scenario:
    """Build a :class:`Scenario` from ``key = value`` lines.

    Blank lines and ``#`` comments are ignored; tuple values are comma
    separated (``cells = 16,2,2``).  Keyword overrides win over the file.
    """
    known = {f.name: f for f in fields(Scenario)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _TUPLE_INT:
                values[key] = tuple(int(v) for v in val.split(","))
            elif key in _TUPLE_FLOAT:
                values[key] = tuple(float(v) for v in val.split(","))
            elif key in {"steps", "p", "order", "k", "seed", "max_weight", "workers"}:
                values[key] = int(val)
            elif key in {"refine_fraction", "coarsen_fraction"}:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError:
            raise ScenarioError(f"line {lineno}: bad value for {key}: {val!r}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Scenario(**values)
    except ValueError as exc:
        raise InvalidArgumentError(str(exc)) from None


def load_scenario(path: str | PathLike, **overrides) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), **overrides)


# -- driver -------------------------------------------------------------------


def _weight_of(s: Scenario, eid: int) -> int:
    if s.max_weight == 1:
        return 1
    return random.Random(f"{s.seed}:{eid}").randint(1, s.max_weight)


def _initial_mesh(s: Scenario) -> TetMesh:
    if s.mesh_file:
        return load_mesh(s.mesh_file)
    return generate_box_mesh(*s.cells, s.dims)


def _blocks(order: list[int], prev_labels: dict[int, int] | None, v: int) -> list[list[int]]:
    """Virtual-rank ownership of the DFS order: the previous partition's
    subgrids, or an even split before the first partition."""
    if prev_labels is None:
        return blocks_of(order, split_even(len(order), v))
    labels = [prev_labels[e] for e in order]
    if any(b < a for a, b in zip(labels, labels[1:])):
        raise ConsistencyError("previous subgrids are not contiguous in DFS order")
    sizes = np.bincount(labels, minlength=v).tolist()
    return blocks_of(order, sizes)


def partition_step(s: Scenario, mesh: TetMesh, forest: RefinementForest, weights, prev_labels, verify=False):
    if s.method is Method.RTK:
        order = forest.dfs_leaf_order()
        labels = partition_scanned(forest, weights, s.p, _blocks(order, prev_labels, s.p))
        if verify and labels != partition_serial(forest, weights, s.p):
            raise ConsistencyError("scanned and serial refinement-tree partitions differ")
        return labels
    keyed = element_keys(mesh, s.mode, _CURVE[s.method], s.order, s.workers)
    ids = np.array([e for e, _, _ in keyed], dtype=np.int64)
    keys = key_fraction([k for _, k, _ in keyed], s.order)
    w = np.array([weights[e] for e in ids.tolist()], dtype=float)
    _, labels = partition_1d((keys, w, ids), s.p, s.k, workers=s.workers)
    return labels


def _mark(s: Scenario, mesh: TetMesh, t: float):
    ids = mesh.element_ids()
    ind = indicator_value(s.indicator, mesh.barycenters(ids), t)
    score = ind * np.cbrt(mesh.volumes(ids))
    n = len(ids)
    # round away float noise in fraction * n before truncating
    n_refine = int(math.floor(round(s.refine_fraction * n, 9)))
    n_coarsen = int(math.floor(round(s.coarsen_fraction * n, 9)))

    by_score = sorted(range(n), key=lambda i: (-score[i], ids[i]))
    refine = {ids[i] for i in by_score[:n_refine]}

    score_of = dict(zip(ids, score.tolist()))
    pairs = []
    for parent in mesh.coarsenable():
        kids = mesh.children(parent)
        if kids[0] in refine or kids[1] in refine:
            continue
        pairs.append((max(score_of[kids[0]], score_of[kids[1]]), parent))
    pairs.sort()
    coarsen = sorted(parent for _, parent in pairs[:n_coarsen])
    return sorted(refine), coarsen


def iter_scenario(s: Scenario, verify: bool = False) -> Iterator[StepRecord]:
    """Yield one :class:`StepRecord` per adaptive step."""
    mesh = _initial_mesh(s)
    forest = RefinementForest.from_mesh(mesh)
    if s.max_weight > 1:
        for eid in mesh.element_ids():
            mesh.set_weight(eid, _weight_of(s, eid))

    weights = mesh.weights()
    labels = partition_step(s, mesh, forest, weights, None, verify)
    placement = dict(labels.part_of)
    prev_labels = dict(labels.part_of)
    seen_events = len(mesh.events)

    for step in range(s.steps):
        refine, coarsen = _mark(s, mesh, step / s.steps)
        for parent in coarsen:
            left, right = mesh.children(parent)
            mesh.coarsen(parent)
            placement[parent] = placement.pop(left)
            prev_labels[parent] = prev_labels.pop(left)
            del placement[right], prev_labels[right]
        for eid in refine:
            ev = mesh.bisect(eid)
            for child in (ev.left_child, ev.right_child):
                placement[child] = placement[eid]
                prev_labels[child] = prev_labels[eid]
                if s.max_weight > 1:
                    mesh.set_weight(child, _weight_of(s, child))
            del placement[eid], prev_labels[eid]
        forest.replay(mesh.events[seen_events:])
        seen_events = len(mesh.events)
        if len(mesh) == 0:
            raise ScenarioError(f"step {step} left the mesh empty")

        weights = mesh.weights()
        t0 = time.perf_counter()
        labels = partition_step(s, mesh, forest, weights, prev_labels, verify)
        t1 = time.perf_counter()
        old = PartitionAssignment(s.p, placement)
        S = build_similarity(old, labels, weights)
        perm = remap_greedy(S)
        t2 = time.perf_counter()

        report = quality_report(mesh, old, labels, perm, weights, s.p, forest)
        identity_totalv, _ = migration_stats(S, np.arange(s.p))
        placement = {e: int(perm[q]) for e, q in labels.part_of.items()}
        prev_labels = dict(labels.part_of)
        yield StepRecord(step, len(mesh), report, identity_totalv, t1 - t0, t2 - t1)


def run_scenario(s: Scenario, verify: bool = False) -> list[StepRecord]:
    return list(iter_scenario(s, verify))


def with_method(s: Scenario, method: Method, mode: NormalizeMode | None = None) -> Scenario:
    return replace(s, method=Method(method), mode=s.mode if mode is None else NormalizeMode(mode))
