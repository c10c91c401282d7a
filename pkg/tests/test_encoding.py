import pytest

from sdnactors.encoding import (
    CONTROL,
    HOST_HANDLE,
    INSTALL,
    SEND_IN,
    SEND_OUT,
    SWITCH_HANDLE,
    Injection,
    build_initial_config,
    delivered,
    dropped,
    flow_tables,
    make_injections,
)
from sdnactors.network import SSH, MatchField, Packet, PacketHeader, TopologyError, lookup, to_host
from sdnactors.policies import PolicySpec
from sdnactors.runtime import enabled_tasks, execute, is_complete

from scenario_matrix import FIG1, LINE

LB = PolicySpec.of("LB", vip="VIP", replicas=["R1", "R2"])
PH = PacketHeader("H0", "VIP")


def fig1(**kw):
    return build_initial_config(FIG1, LB, [Injection("H0", Packet(0, PH))], **kw)


def step(cfg, actor_name, method):
    """Run the lowest enabled task of ``method`` on the named actor."""
    for aid, tid in enabled_tasks(cfg):
        if cfg.actors[aid].name == actor_name and cfg.tasks[tid].method == method:
            return execute(cfg, (aid, tid))[0]
    raise AssertionError(f"no enabled {method} on {actor_name}")


def run(cfg, *moves):
    for m in moves:
        cfg = step(cfg, *m)
    return cfg


def test_actor_layout():
    cfg = fig1()
    assert [(a.kind, a.name) for a in cfg.actors] == [
        ("Controller", "ctrl"), ("Switch", "S1"), ("Switch", "S2"), ("Switch", "S3"),
        ("Host", "H0"), ("Host", "R1"), ("Host", "R2"),
    ]  # fmt: skip
    assert [t.method for t in cfg.tasks.values()] == [SEND_IN]


def test_rules_before_packet_out_reach_r1():
    cfg = run(
        fig1(),
        ("H0", SEND_IN), ("S1", SWITCH_HANDLE), ("ctrl", CONTROL),
        ("S1", INSTALL), ("S2", INSTALL), ("S1", SEND_OUT),
        ("S2", SWITCH_HANDLE), ("R1", HOST_HANDLE),
    )  # fmt: skip
    assert is_complete(cfg)
    assert [p.id for p in delivered(cfg)["R1"]] == [0]
    assert lookup(flow_tables(cfg)["S2"], MatchField(PH, 1)) == to_host("R1")


def test_packet_out_racing_ahead_of_its_rule_goes_back_to_controller():
    cfg = run(
        fig1(),
        ("H0", SEND_IN), ("S1", SWITCH_HANDLE), ("ctrl", CONTROL),
        ("S1", INSTALL), ("S1", SEND_OUT), ("S2", SWITCH_HANDLE), ("ctrl", CONTROL),
    )  # fmt: skip
    # the second decision picks R2, and S2 gets a rule sending the packet back
    names = {cfg.actors[t.actor].name for t in cfg.tasks.values() if t.method == INSTALL and not t.finished}
    assert "S2" in names and "S1" in names


def test_loop_detection_flags_a_revisit():
    cfg = run(
        fig1(detect_loops=True),
        ("H0", SEND_IN), ("S1", SWITCH_HANDLE), ("ctrl", CONTROL),
        ("S1", INSTALL), ("S1", SEND_OUT), ("S2", SWITCH_HANDLE), ("ctrl", CONTROL),
        ("S2", INSTALL), ("S2", INSTALL), ("S1", INSTALL), ("S3", INSTALL), ("S2", SEND_OUT),
        ("S1", SWITCH_HANDLE),
    )  # fmt: skip
    assert [p for p, _ in cfg.errors] == ["forwarding_loop"]
    assert "packet 0 reached S1 twice" in cfg.errors[0][1]


def test_conflict_detection_flags_contradictory_rules():
    cfg = build_initial_config(
        LINE, PolicySpec.of("SSH_BUGGY"), [Injection("H0", Packet(0, PacketHeader("H0", "H1", SSH)))],
        detect_conflicts=True,
    )  # fmt: skip
    cfg = run(cfg, ("H0", SEND_IN), ("S1", SWITCH_HANDLE), ("ctrl", CONTROL), ("S1", INSTALL), ("S1", INSTALL))
    assert [p for p, _ in cfg.errors] == ["contradictory_rules"]


def test_policy_without_rules_drops_at_ingress():
    spec = PolicySpec.of("LB", vip="VIP", replicas=[])
    cfg = build_initial_config(FIG1, spec, [Injection("H0", Packet(0, PH))])
    cfg = run(cfg, ("H0", SEND_IN), ("S1", SWITCH_HANDLE), ("ctrl", CONTROL), ("S1", SEND_OUT))
    assert is_complete(cfg) and dropped(cfg)["S1"] == (0,)


def test_injections_expand_counts_with_fresh_ids():
    inj = make_injections([("H0", PH, 2), ("R1", PacketHeader("R1", "H0"), 1)])
    assert [(i.host, i.packet.id) for i in inj] == [("H0", 0), ("H0", 1), ("R1", 2)]


def test_builder_rejects_bad_injections():
    with pytest.raises(ValueError):
        build_initial_config(FIG1, LB, [Injection("H0", Packet(0, PH)), Injection("H0", Packet(0, PH))])
    with pytest.raises((ValueError, TopologyError)):
        build_initial_config(FIG1, LB, [Injection("H9", Packet(0, PH))])
