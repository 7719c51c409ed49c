import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from commexplore.cli import main
from commexplore.harness import ReplayParseError, RngStreams, derived_seed, replay_check, run

from conftest import ROOT


@pytest.fixture(scope="module")
def minimal_run(tmp_path_factory, scenarios_dir):
    out = tmp_path_factory.mktemp("minimal")
    return run(scenarios_dir / "minimal.json", seed=0, out_dir=out, duration=60), out


def test_smallest_run_covers_everything(minimal_run):
    rep, out = minimal_run
    assert rep.final_coverage == 1.0
    for name in ("report.json", "events.jsonl", "delivery.jsonl", "metrics.csv", "planner.jsonl",
                 "irm.jsonl", "mesh.csv"):
        assert (out / name).is_file()


def test_same_invocation_same_digest(scenarios_dir, minimal_run):
    rep, _ = minimal_run
    assert run(scenarios_dir / "minimal.json", seed=0, duration=60).digest == rep.digest


def test_seed_changes_the_log(scenarios_dir):
    a = run(scenarios_dir / "subway_lattice.json", seed=1, duration=60)
    b = run(scenarios_dir / "subway_lattice.json", seed=2, duration=60)
    assert a.digest != b.digest


def test_health_record_every_period(minimal_run):
    rep, _ = minimal_run
    assert rep.health_records["r1"] == 60 / 5
    assert rep.messages["MissionCritical"]["enqueued"] == 12


def test_report_shape(minimal_run):
    rep, out = minimal_run
    times = [t for t, _ in rep.coverage]
    fracs = [c for _, c in rep.coverage]
    assert times == sorted(times) and fracs == sorted(fracs)
    assert sum(rep.behavior_ticks["r1"].values()) == rep.ticks
    on_disk = json.loads((out / "report.json").read_text())
    assert on_disk["digest"] == rep.digest


def test_distances_match_odometer_column(minimal_run):
    rep, out = minimal_run
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[-1]["r1_odometer"]) == pytest.approx(rep.distance_m["r1"], abs=1e-9)


def test_message_conservation_every_sample(minimal_run):
    _, out = minimal_run
    with open(out / "metrics.csv") as fh:
        for row in csv.DictReader(fh):
            for cls in ("Key", "MissionCritical", "TimeSensitive"):
                parts = sum(int(row[f"{cls}_{k}"]) for k in ("delivered", "in_flight", "queued", "dropped"))
                assert parts == int(row[f"{cls}_enqueued"])


def test_entropy_bookkeeping(scenarios_dir):
    rep = run(scenarios_dir / "subway_lattice.json", seed=3, duration=300)
    assert rep.info_gain_total == pytest.approx(rep.entropy_initial - rep.entropy_final, abs=1e-9)


# -- random streams ---------------------------------------------------------------


def test_derived_seed_is_pure():
    assert derived_seed(7, "world") == derived_seed(7, "world")
    assert derived_seed(7, "world") != derived_seed(7, "netloss")


def test_streams_are_independent():
    a, b = RngStreams(5), RngStreams(5)
    a["world"].random(1000)
    assert np.array_equal(a["planner"].random(8), b["planner"].random(8))


# -- replay ---------------------------------------------------------------------


def test_untouched_log_replays(minimal_run):
    _, out = minimal_run
    v = replay_check(out / "events.jsonl")
    assert v.ok and v.first_divergent_tick is None


def _first_event(lines):
    for k, line in enumerate(lines[1:], 1):
        rec = json.loads(line)
        if "kind" in rec and rec["kind"] == "MessageDelivered":
            return k, rec["tick"]
    raise AssertionError("no delivered message in log")


def test_one_edited_byte_fails_at_its_tick(minimal_run, tmp_path):
    _, out = minimal_run
    lines = (out / "events.jsonl").read_text().splitlines()
    k, tick = _first_event(lines)
    lines[k] = lines[k].replace('"seq":1', '"seq":7', 1)
    bad = tmp_path / "events.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    v = replay_check(bad)
    assert not v.ok and v.first_divergent_tick == tick


def test_corrupt_log_is_a_parse_error(tmp_path):
    p = tmp_path / "events.jsonl"
    p.write_text('{"header": {}}\n{not json\n')
    with pytest.raises(ReplayParseError, match=":2:"):
        replay_check(p)
    p.write_text('{"tick": 1, "digest": "x"}\n')
    with pytest.raises(ReplayParseError, match="header"):
        replay_check(p)


# -- numba and pure paths ---------------------------------------------------------


def _digest_in_child(disable: bool) -> str:
    env = dict(os.environ)
    env.pop("COMMEXPLORE_DISABLE_NUMBA", None)
    if disable:
        env["COMMEXPLORE_DISABLE_NUMBA"] = "1"
    code = ("from commexplore.harness import run;"
            f"print(run({str(ROOT / 'scenarios' / 'subway_lattice.json')!r}, seed=0, duration=120).digest)")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return res.stdout.strip()


@pytest.mark.slow
def test_compiled_and_pure_kernels_agree():
    assert _digest_in_child(False) == _digest_in_child(True)


# -- CLI --------------------------------------------------------------------------


def test_cli_validate_codes(scenarios_dir, tmp_path, capsys):
    assert main(["validate", "--scenario", str(scenarios_dir / "minimal.json")]) == 0
    assert main(["validate", "--scenario", str(scenarios_dir / "minimal.json"), "--override", "nope.x=1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["validate", "--scenario", str(bad)]) == 2
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == 3


def test_cli_run_and_replay(scenarios_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", str(scenarios_dir / "minimal.json"), "--duration", "20",
                 "--out", str(out)]) == 0
    assert main(["replay", str(out / "events.jsonl")]) == 0
    log = out / "events.jsonl"
    log.write_text(log.read_text().replace('"tick":3', '"tick":4', 1))
    assert main(["replay", str(log)]) != 0
