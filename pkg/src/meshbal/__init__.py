"""Dynamic load balancing for adaptive tetrahedral meshes."""

from .errors import (
    ConsistencyError,
    DegenerateInputError,
    InvalidArgumentError,
    MeshBalError,
    MeshParseError,
    NotFoundError,
    PreconditionError,
    ScenarioError,
    UnsupportedError,
)
from .harness import Indicator, Method, Scenario, StepRecord, run_scenario
from .mesh import BBox, BisectionEvent, CoarsenEvent, Point3, Tet, TetMesh, generate_box_mesh, load_mesh, save_mesh
from .metrics import QualityReport, edge_cut, imbalance, quality_report
from .part1d import CutSet, WeightedKey, partition_1d
from .remap import build_similarity, cost_F, migration_stats, remap_exact, remap_greedy
from .rtree import PartitionAssignment, RefinementForest, partition_scanned, partition_serial, prefix_sums
from .sfc import CurveKind, NormalizeMode, element_keys, hilbert_key, morton_key, normalize

__version__ = "0.1.0"
