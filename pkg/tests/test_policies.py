from collections import Counter

from hypothesis import given, strategies as st

from sdnactors.network import DROP, SSH, MatchField, PacketHeader, to_host, to_switch
from sdnactors.policies import FLOOD, Directive, PolicySpec, apply_policy, initial_policy_state, split_flood

from scenario_matrix import FIG1, LINE, STAR

LB = PolicySpec.of("LB", vip="VIP", replicas=["R1", "R2"])


def decide(spec, top, sid, o, ph, state=None):
    return apply_policy(spec, state if state is not None else initial_policy_state(spec, top), top, sid, o, ph)


def test_load_balancer_first_choice_is_first_replica():
    rules, _ = decide(LB, FIG1, "S1", 0, PacketHeader("H0", "VIP"))
    ph = PacketHeader("H0", "VIP")
    assert rules == [
        Directive("S1", MatchField(ph, 0), 0, to_switch("S2", 1)),
        Directive("S2", MatchField(ph, 1), 0, to_host("R1")),
    ]


@given(st.integers(1, 40))
def test_load_balancer_is_fair(n):
    state = initial_policy_state(LB, FIG1)
    picks = Counter()
    for i in range(n):
        rules, state = decide(LB, FIG1, "S1", 0, PacketHeader(f"H{i % 3}", "VIP"), state)
        picks[rules[-1].action.target] += 1
    assert abs(picks["R1"] - picks["R2"]) <= 1 and picks["R1"] >= picks["R2"]


def test_load_balancer_keeps_one_counter_per_service():
    spec = PolicySpec.of("LB", services={"A": ["R1", "R2"], "B": ["R2", "R1"]})
    state = initial_policy_state(spec, FIG1)
    r1, state = decide(spec, FIG1, "S1", 0, PacketHeader("H0", "A"), state)
    r2, state = decide(spec, FIG1, "S1", 0, PacketHeader("H0", "B"), state)
    assert r1[-1].action.target == "R1" and r2[-1].action.target == "R2"


def test_ssh_buggy_drop_shares_the_forward_priority():
    rules, _ = decide(PolicySpec.of("SSH_BUGGY"), LINE, "S1", 0, PacketHeader("H0", "H1", SSH))
    drops = [d for d in rules if d.action == DROP]
    fwd = [d for d in rules if d.switch == "S1" and d.action != DROP]
    assert drops and fwd and drops[0].priority == fwd[0].priority


def test_ssh_correct_drop_wins():
    rules, _ = decide(PolicySpec.of("SSH_CORRECT"), LINE, "S1", 0, PacketHeader("H0", "H1", SSH))
    drop = [d for d in rules if d.action == DROP][0]
    assert all(drop.priority > d.priority for d in rules if d.action != DROP)


def test_ssh_leaves_other_traffic_alone():
    rules, _ = decide(PolicySpec.of("SSH_CORRECT"), LINE, "S1", 0, PacketHeader("H0", "H1"))
    assert rules and all(d.action != DROP for d in rules)


def test_learning_switch_floods_unknown_and_routes_known():
    spec = PolicySpec.of("LE", authenticated=["H0", "H1"])
    rules, state = decide(spec, LINE, "S1", 0, PacketHeader("H0", "H1"))
    assert split_flood(rules) == ([], True)
    rules, _ = decide(spec, LINE, "S2", 0, PacketHeader("H1", "H0"), state)
    assert not split_flood(rules)[1] and rules[-1].action == to_host("H0")


def test_learning_switch_ignores_unauthenticated():
    rules, _ = decide(PolicySpec.of("LE"), LINE, "S1", 0, PacketHeader("H0", "H1"))
    assert rules == []


def test_learning_switch_authenticates_through_server():
    spec = PolicySpec.of("LE", auth_server="H1")
    rules, state = decide(spec, LINE, "S1", 0, PacketHeader("H0", "H1"))
    assert rules == [FLOOD] and state.get(("auth", "H0"))


def test_firewall_trusts_through_trusted_port_only():
    mi = PolicySpec.of("MI", trusted_port=1)
    rules, _ = decide(mi, STAR, "S1", 2, PacketHeader("H1", "H0"))
    assert rules == []
    rules, state = decide(mi, STAR, "S1", 1, PacketHeader("H0", "H1"))
    assert rules and state.get(("trusted", "H1"))
    rules, _ = decide(mi, STAR, "S1", 2, PacketHeader("H1", "H0"), state)
    assert rules[-1].action == to_host("H0")


def test_buggy_firewall_skips_the_check():
    rules, _ = decide(PolicySpec.of("MIB", trusted_port=1), STAR, "S1", 2, PacketHeader("H1", "H0"))
    assert rules[-1].action == to_host("H0")
