import json
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from sdnactors import scenario
from sdnactors.cli import EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, main
from sdnactors.dpor import Independence, Mode
from sdnactors.network import OTHER, SSH, PacketHeader
from sdnactors.policies import PolicySpec
from sdnactors.scenario import Scenario, ScenarioError, Traffic

from scenario_matrix import FIG1


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip().startswith("{") else out), err


# scenario files

hosts = st.sampled_from(sorted(FIG1.hosts))
traffic = st.builds(
    Traffic,
    hosts,
    st.builds(PacketHeader, hosts, st.sampled_from(["VIP", "H0", "R1"]), st.sampled_from([OTHER, SSH])),
    st.integers(1, 3),
)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(traffic, max_size=4),
    st.sampled_from(list(Mode)),
    st.sampled_from(list(Independence)),
    st.sampled_from([None, True, False]),
    st.sampled_from([(), ("forwarding_loop",), ("contradictory_rules", "safety_delivery")]),
)
def test_round_trip(tr, mode, level, barriers, props):
    sc = Scenario(
        FIG1, PolicySpec.of("LB", vip="VIP", replicas=["R1", "R2"]), barriers, False, tuple(tr), mode, level,
        properties=props, name="x",
    )  # fmt: skip
    assert scenario.loads(scenario.dumps(sc)) == sc


def test_every_bundled_scenario_loads():
    names = scenario.bundled_names()
    assert {"lb_buggy_1pkt", "lbb_1pkt", "ssh_buggy", "ssh_correct", "mi", "mib"} <= set(names)
    for n in names:
        sc = scenario.load(n)
        assert sc.name == n
        assert scenario.loads(scenario.dumps(sc)) == sc


def test_file_paths_load_too(tmp_path):
    p = tmp_path / "mine.json"
    p.write_text(scenario.dumps(scenario.load("trivial")))
    assert scenario.load(p) == scenario.load("trivial")


@pytest.mark.parametrize(
    "doc,fragment",
    [
        ({"controller": {"family": "LB"}}, "topology"),
        ({"topology": {}, "controller": {"family": "XX"}}, "controller/family"),
        ({"topology": {"sh_links": [["S1", "H0", -1]]}, "controller": {"family": "LB"}}, "sh_links"),
        ({"topology": {}, "controller": {"family": "LB"}, "colour": 1}, "colour"),
        ({"topology": {}, "controller": {"family": "LB"}, "exploration": {"independence": "hunch"}}, "independence"),
    ],
)
def test_schema_errors_say_where(doc, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        scenario.Scenario.from_dict(doc)


def test_semantic_errors():
    base = scenario.load("lb_buggy_2pkt_same").to_dict()
    base["exploration"]["packet_bound"] = 1
    with pytest.raises(ScenarioError, match="packet_bound"):
        scenario.Scenario.from_dict(base)
    base = scenario.load("trivial").to_dict()
    base["injections"][0]["host"] = "H7"
    with pytest.raises(ScenarioError, match="H7"):
        scenario.Scenario.from_dict(base)
    with pytest.raises(ScenarioError):
        scenario.loads("[1, 2]")
    with pytest.raises(ScenarioError):
        scenario.load("no_such_scenario")


# command line


def test_running_example_from_the_command_line(capsys):
    code, rep, _ = run_cli(capsys, "lb_buggy_1pkt")
    # the forwarding loop is the bug, so the run reports it
    assert code == EXIT_VIOLATION and rep["status"] == "violation"
    assert rep["result"]["execs"] == 8 and rep["flagged"]["forwarding_loop"] >= 1
    assert rep["result"]["distinct_final_states"] == len(rep["final_states"])


def test_barrier_scenario_has_one_execution(capsys):
    code, rep, _ = run_cli(capsys, "lbb_1pkt")
    assert code == EXIT_OK and rep["result"]["execs"] == 1
    (final,) = rep["final_states"]
    r1 = [a for a in final["actors"] if a["name"] == "R1"][0]
    assert len(r1["fields"]["delivered"]) == 1


def test_violation_exit_code_and_trace(capsys, tmp_path):
    out = tmp_path / "t.jsonl"
    code, rep, _ = run_cli(capsys, "ssh_buggy", "--trace-out", str(out))
    assert code == EXIT_VIOLATION and rep["status"] == "violation"
    (v,) = rep["violations"]
    assert v["property"] == "contradictory_rules" and "VIOLATION contradictory_rules" in v["trace"][-1]
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert [r["step"] for r in rows] == list(range(len(v["trace"])))
    assert rows[-1]["violations"]


@pytest.mark.parametrize("argv", [["no_such_scenario"], [], ["trivial", "--max-depth", "-1"]])
def test_errors_exit_with_two(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == EXIT_ERROR and "error" in err and not out


def test_reports_are_deterministic(capsys):
    def strip(rep):
        rep["result"].pop("elapsed_s")
        return rep

    a = strip(run_cli(capsys, "lb_buggy_1pkt", "--independence", "entry")[1])
    b = strip(run_cli(capsys, "lb_buggy_1pkt", "--independence", "entry")[1])
    assert a == b


def test_overrides_reach_the_explorer(capsys):
    _, rep, _ = run_cli(capsys, "lb_buggy_1pkt", "--independence", "naive", "--mode", "property")
    assert rep["options"]["independence"] == "naive" and rep["options"]["mode"] == "property"
    assert rep["result"]["stopped_early"] and len(rep["violations"]) == 1
    _, rep, _ = run_cli(capsys, "lb_buggy_1pkt", "--barriers", "on")
    assert rep["options"]["barriers"] is True and rep["result"]["execs"] == 1


def test_crosscheck_from_the_command_line(capsys):
    code, rep, _ = run_cli(capsys, "lb_buggy_1pkt", "--crosscheck")
    assert code == EXIT_OK and rep["status"] == "MATCH" and rep["oracle_finals"] == rep["matched"] == 8
    code, rep, _ = run_cli(capsys, "trivial", "--crosscheck")
    assert code == EXIT_OK and rep["oracle_finals"] == 1
    code, rep, _ = run_cli(capsys, "lbb_1pkt", "--crosscheck")
    assert code == EXIT_ERROR and rep["status"] == "rejected"


def test_list_and_console_script(capsys):
    code, out, _ = run_cli(capsys, "--list")
    assert code == EXIT_OK and "lbb_1pkt" in out.split()
    done = subprocess.run([sys.executable, "-m", "sdnactors.cli", "trivial"], capture_output=True, text=True)
    assert done.returncode == 0 and json.loads(done.stdout)["result"]["execs"] == 1
