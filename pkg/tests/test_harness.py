import math

import numpy as np
import pytest

from meshbal.errors import InvalidArgumentError, ScenarioError
from meshbal.harness import (
    Indicator,
    Method,
    Scenario,
    indicator_value,
    load_scenario,
    parse_scenario,
    run_scenario,
    scan_emulate,
    with_method,
)
from meshbal.mesh import generate_box_mesh, save_mesh


def small(**kw):
    base = dict(cells=(2, 2, 2), steps=4, refine_fraction=0.1, coarsen_fraction=0.02, p=4)
    base.update(kw)
    return Scenario(**base)


# -- indicator ------------------------------------------------------------------


def test_uniform_indicator():
    assert indicator_value(Indicator.UNIFORM, (0.3, 0.1, 7.0), 0.4) == 1.0
    assert indicator_value("uniform", np.zeros((5, 3)), 0.0).tolist() == [1.0] * 5


@pytest.mark.parametrize("t", [0.0, 0.03, 1 / 16, 0.2, 0.5, 0.9])
def test_moving_peak_center_on_circle(t):
    cx, cy = 0.5 + 0.4 * math.sin(8 * math.pi * t), 0.5 + 0.4 * math.cos(8 * math.pi * t)
    assert math.isclose(math.hypot(cx - 0.5, cy - 0.5), 0.4)
    g = np.linspace(0, 1, 41)
    pts = np.array([(x, y, z) for x in g for y in g for z in (0.5, 1.0)] + [(cx, cy, 1.0)])
    vals = indicator_value(Indicator.MOVING_PEAK, pts, t)
    assert vals[-1] == vals.max()
    assert math.isclose(vals[-1], math.exp(1 / 0.9 - 2.5))


def test_moving_peak_quarter_turns():
    # 8*pi*t: the center returns to its start every t = 1/4
    for t, center in [(0.0, (0.5, 0.9, 1)), (1 / 16, (0.9, 0.5, 1)), (1 / 8, (0.5, 0.1, 1)), (0.25, (0.5, 0.9, 1))]:
        assert math.isclose(indicator_value("moving_peak", center, t), math.exp(1 / 0.9 - 2.5))


def test_scan_emulate_reexport():
    assert scan_emulate([2, 3, 5]) == [0, 2, 5]


# -- scenarios ------------------------------------------------------------------


def test_trivial_scenario():
    recs = run_scenario(Scenario(cells=(1, 1, 1), steps=1, refine_fraction=0.0, p=1))
    assert len(recs) == 1
    assert recs[0].report.imbalance == 1.0 and recs[0].report.migration_fraction == 0.0
    assert recs[0].element_count == 6


def test_uniform_full_refinement_doubles():
    recs = run_scenario(Scenario(cells=(1, 1, 1), indicator="uniform", steps=4, refine_fraction=1.0, p=3))
    assert [r.element_count for r in recs] == [12, 24, 48, 96]


@pytest.mark.parametrize("method", list(Method))
def test_scenario_invariants(method):
    s = small(method=method, max_weight=4, seed=3, steps=6)
    recs = run_scenario(s, verify=True)
    assert [r.step for r in recs] == list(range(6))
    n = 48
    coarsened = 0
    for r in recs:
        assert r.element_count > 0
        assert r.report.totalv <= r.identity_totalv
        assert 0 <= r.report.migration_fraction <= 1
        W = sum(r.report.part_weights)
        assert max(r.report.part_weights) <= W / s.p + 4
        refined = math.floor(round(s.refine_fraction * n, 9))
        coarsened += n + refined - r.element_count
        n = r.element_count
    assert coarsened > 0


def test_determinism_and_worker_independence():
    s = small(method="hilbert", steps=3, workers=1)
    a, b = run_scenario(s), run_scenario(s)
    c = run_scenario(small(method="hilbert", steps=3, workers=4))
    assert a == b == c
    assert [r.to_json() for r in a] == [r.to_json() for r in c]


def test_seed_changes_weights_only_when_weighted():
    unweighted = [run_scenario(small(seed=s, steps=2)) for s in (1, 2)]
    assert unweighted[0] == unweighted[1]
    weighted = [run_scenario(small(seed=s, steps=2, max_weight=9)) for s in (1, 2)]
    assert weighted[0] != weighted[1]


def test_record_json_omits_timings_by_default():
    rec = run_scenario(small(steps=1))[0]
    assert "partition_time" not in rec.to_dict()
    assert set(rec.to_dict(timings=True)) >= {"partition_time", "remap_time"}


@pytest.mark.parametrize(
    "kw",
    [
        dict(steps=0),
        dict(p=0),
        dict(refine_fraction=1.2),
        dict(coarsen_fraction=1.0),
        dict(refine_fraction=0.6, coarsen_fraction=0.5),
        dict(order=22),
        dict(k=1),
        dict(seed=-1),
    ],
)
def test_scenario_validation(kw):
    with pytest.raises(InvalidArgumentError):
        Scenario(**kw)
    with pytest.raises(InvalidArgumentError):
        Scenario(method="rcb")


def test_parse_scenario():
    s = parse_scenario("# moving peak\ncells = 8,1,1\ndims = 8, 1, 1\nsteps=3\nmethod = hilbert\nmode = stretch\n", p=2)
    assert s.cells == (8, 1, 1) and s.dims == (8.0, 1.0, 1.0) and s.steps == 3 and s.p == 2
    assert s.method is Method.HILBERT and s.mode.value == "stretch"
    assert with_method(s, "rtk").method is Method.RTK
    with pytest.raises(ScenarioError, match="unknown key"):
        parse_scenario("colour = red\n")
    with pytest.raises(ScenarioError, match="line 2"):
        parse_scenario("steps = 2\np = many\n")
    with pytest.raises(ScenarioError):
        parse_scenario("steps 2\n")
    with pytest.raises(InvalidArgumentError):
        parse_scenario("steps = 0\n")


def test_scenario_from_mesh_file(tmp_path):
    save_mesh(generate_box_mesh(2, 1, 1, (2, 1, 1)), tmp_path / "box.mesh")
    (tmp_path / "s.txt").write_text(f"mesh_file = {tmp_path / 'box.mesh'}\nsteps = 2\np = 2\nrefine_fraction = 0.25\n")
    recs = run_scenario(load_scenario(tmp_path / "s.txt"))
    assert [r.element_count for r in recs] == [15, 18]
