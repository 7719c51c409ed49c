import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commexplore.config import WorldParams
from commexplore.events import EventKind
from commexplore.scenario import ScenarioError, load_scenario, minimal_scenario, scenario_from_dict
from commexplore.world import (
    Command,
    CoverageBelief,
    Edge,
    Health,
    Platform,
    RobotState,
    WorldGraph,
    apply_observation,
    binary_entropy,
    entropy,
    step,
    tick_failure_prob,
)

from conftest import h2, line_world


def test_minimal_scenario_loads(scenarios_dir):
    sc = load_scenario(scenarios_dir / "minimal.json")
    assert len(sc.world) == 2 and len(sc.world.edges) == 1
    assert [r.node for r in sc.robots.values()] == [sc.world.base]


def test_subway_lattice_is_connected(scenarios_dir):
    sc = load_scenario(scenarios_dir / "subway_lattice.json")
    assert sc.world.reachable_from_base() == set(sc.world.ids)
    assert len(sc.robots) == 3


def test_risk_out_of_range_is_rejected():
    raw = minimal_scenario()
    raw["edges"][0]["risk"] = 1.2
    with pytest.raises(ScenarioError, match="risk out of range"):
        scenario_from_dict(raw)


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "nodes": [\n  oops\n]}')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(p)


def test_schema_error_names_field():
    raw = minimal_scenario()
    raw["robots"][0]["platform"] = "Hovercraft"
    with pytest.raises(ScenarioError, match="robots/0/platform"):
        scenario_from_dict(raw)


def test_disconnected_graph_is_rejected():
    raw = minimal_scenario()
    raw["nodes"].append({"id": 9, "pos": [50, 0, 0]})
    with pytest.raises(ScenarioError, match="not connected"):
        scenario_from_dict(raw)


def test_shipped_schema_matches_loader(scenarios_dir):
    from commexplore.scenario import SCHEMA

    shipped = json.loads((scenarios_dir.parent / "docs" / "scenario.schema.json").read_text())
    assert shipped == json.loads(json.dumps(SCHEMA))


# -- motion -------------------------------------------------------------------


def _robots(platform=Platform.WHEELED, n=1):
    return {f"r{k}": RobotState(f"r{k}", platform, 0) for k in range(n)}


def test_noise_free_motion_matches_command():
    w = line_world(3)
    robots = _robots()
    params = WorldParams(slip_max={"Wheeled": 0.0})
    for t in range(8):
        ev = step(w, robots, {"r0": Command("move", target=robots["r0"].target or robots["r0"].node + 1, speed=1.0)},
                  0.5, np.random.default_rng(t), params, t)
        assert robots["r0"].measured_speed == robots["r0"].commanded_speed == 1.0
        assert not any(e.kind in (EventKind.STUCK_ONSET, EventKind.FALL_ONSET) for e in ev)
    assert robots["r0"].odometer == pytest.approx(4.0)


def test_same_seed_same_events():
    def go():
        w = line_world(6, risk=0.3)
        robots = _robots(n=2)
        out = []
        rng = np.random.default_rng(11)
        for t in range(60):
            cmds = {rid: Command("move", target=min(r.node + 1, 5) if r.at_node() else r.target, speed=1.0)
                    for rid, r in robots.items() if r.health == Health.NOMINAL}
            out.extend(e.to_json() for e in step(w, robots, cmds, 0.5, rng, tick=t))
        return out

    assert go() == go()


def test_failure_frequency_matches_risk():
    # 10 000 full traversals of a risk-0.5 edge, 10 ticks each
    rng = np.random.default_rng(2024)
    w = WorldGraph([0, 1], [(0, 0, 0), (5, 0, 0)], [1, 1], [Edge(0, 1, 5.0, 1.0, 0.5, slip=0.0)], 0)
    failures = 0
    for _ in range(10_000):
        robots = _robots()
        for t in range(10):
            step(w, robots, {"r0": Command("move", target=1, speed=1.0)}, 0.5, rng, tick=t)
            if robots["r0"].health != Health.NOMINAL:
                failures += 1
                break
    assert failures / 10_000 == pytest.approx(0.5, abs=0.02)


def test_legged_falls_others_stick():
    w = WorldGraph([0, 1], [(0, 0, 0), (5, 0, 0)], [1, 1], [Edge(0, 1, 5.0, 1.0, 1.0)], 0)
    for platform, health in [(Platform.LEGGED, Health.FALLEN), (Platform.WHEELED, Health.STUCK),
                             (Platform.AERIAL, Health.STUCK)]:
        robots = _robots(platform)
        step(w, robots, {"r0": Command("move", target=1, speed=1.0)}, 0.5, np.random.default_rng(0))
        assert robots["r0"].health == health


def test_command_for_faulted_robot_is_rejected_per_robot():
    w = line_world(3)
    robots = _robots(n=2)
    robots["r0"].health = Health.OUT_OF_SERVICE
    ev = step(w, robots, {rid: Command("move", target=1, speed=1.0) for rid in robots}, 0.5,
              np.random.default_rng(0))
    assert [e.kind for e in ev if e.robot_id == "r0"] == [EventKind.COMMAND_REJECTED]
    assert robots["r1"].odometer > 0


def test_nonpositive_dt_is_an_error():
    with pytest.raises(ValueError):
        step(line_world(2), _robots(), {}, 0.0, np.random.default_rng(0))


@settings(max_examples=60, deadline=None)
@given(risk=st.floats(0.0, 1.0), k=st.integers(1, 400))
def test_hazard_compounds_to_edge_risk(risk, k):
    p = tick_failure_prob(risk, 1.0 / k)
    assert 1.0 - (1.0 - p) ** k == pytest.approx(risk, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dt=st.sampled_from([0.1, 0.25, 0.5, 1.0]))
def test_displacement_equals_measured_speed_times_dt(seed, dt):
    w = line_world(4, spacing=7.0)
    robots = _robots()
    rng = np.random.default_rng(seed)
    for t in range(30):
        r = robots["r0"]
        before = r.odometer
        remaining = (1.0 - r.progress) * 7.0 if not r.at_node() else 7.0
        tgt = r.target if not r.at_node() else min(r.node + 1, 3)
        if r.at_node() and r.node == 3:
            break
        step(w, robots, {"r0": Command("move", target=tgt, speed=1.2)}, dt, rng, tick=t)
        assert r.measured_speed >= 0
        assert r.odometer - before == pytest.approx(min(r.measured_speed * dt, remaining), abs=1e-12)
        assert 0.0 <= r.progress <= 1.0


# -- coverage belief ----------------------------------------------------------


def _belief(probs, eps=0.0):
    pos = np.zeros((len(probs), 3))
    return CoverageBelief(pos, np.array(probs, dtype=float), eps)


def test_gain_zero_when_already_covered():
    b = _belief([1 - 1e-6] * 3, 1e-6)
    assert apply_observation(b, (0, 0, 0), 1.0) == 0.0


def test_gain_one_bit_at_half():
    assert apply_observation(_belief([0.5]), (0, 0, 0), 1.0) == pytest.approx(1.0, abs=1e-15)


def test_gain_sums_binary_entropies():
    b = _belief([0.5, 0.9, 0.1])
    assert apply_observation(b, (0, 0, 0), 1.0) == pytest.approx(h2(0.5) + h2(0.9) + h2(0.1), abs=1e-12)


def test_out_of_range_nodes_untouched():
    b = CoverageBelief(np.array([[0, 0, 0], [10, 0, 0]], float), np.array([0.5, 0.5]), 0.0)
    assert apply_observation(b, (0, 0, 0), 3.0) == pytest.approx(1.0)
    assert b.covered_prob[1] == 0.5
    assert apply_observation(b, (100, 0, 0), 3.0) == 0.0


def test_radius_must_be_positive():
    with pytest.raises(ValueError):
        apply_observation(_belief([0.5]), (0, 0, 0), 0.0)


@pytest.mark.parametrize("probs,expected", [
    ([0.0, 1.0, 1.0, 0.0], 0.0),
    ([0.5], 1.0),
    ([0.25, 0.75], 1.6225562489182657),
])
def test_entropy_values(probs, expected):
    assert entropy(_belief(probs)) == pytest.approx(expected, abs=1e-12)
    assert entropy(_belief(probs)) == pytest.approx(sum(h2(p) for p in probs), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(probs=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30),
       eps=st.sampled_from([0.0, 1e-6, 1e-3]), radius=st.floats(0.1, 20.0))
def test_observation_never_raises_entropy(probs, eps, radius):
    n = len(probs)
    pos = np.c_[np.arange(n) * 1.5, np.zeros(n), np.zeros(n)]
    b = CoverageBelief(pos, np.array(probs), eps)
    before = entropy(b)
    gain = apply_observation(b, (0, 0, 0), radius)
    assert gain >= 0.0
    assert entropy(b) <= before + 1e-12
    assert gain == pytest.approx(before - entropy(b), abs=1e-9)
    assert np.all((b.covered_prob >= 0) & (b.covered_prob <= 1))


def test_binary_entropy_exact_zero_at_extremes():
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert math.isclose(binary_entropy(0.5), 1.0)
