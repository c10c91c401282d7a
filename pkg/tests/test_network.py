import pytest
from hypothesis import given, strategies as st

from sdnactors.network import (
    DROP,
    EMPTY_TABLE,
    Hop,
    MatchField,
    PacketHeader,
    TopologyError,
    conflicting,
    lookup,
    put,
    shortest_path,
    to_host,
    to_switch,
    topology,
    winning_priority,
)

from scenario_matrix import FIG1, TRIANGLE

H = PacketHeader("H0", "VIP")
M = MatchField(H, 0)
ACTIONS = [DROP, to_host("R1"), to_switch("S2", 1), to_switch("S3", 1)]
entries = st.lists(st.tuples(st.integers(0, 3), st.sampled_from(ACTIONS)), max_size=8)


def test_empty_table_misses():
    assert lookup(EMPTY_TABLE, M) is None and winning_priority(EMPTY_TABLE, M) is None


def test_later_entry_wins_a_tie():
    ft = put(put(EMPTY_TABLE, M, 0, to_host("R1")), M, 0, DROP)
    assert lookup(ft, M) == DROP


def test_higher_priority_wins_regardless_of_order():
    ft = put(put(EMPTY_TABLE, M, 1, DROP), M, 0, to_host("R1"))
    assert lookup(ft, M) == DROP


def test_other_port_is_a_different_entry():
    ft = put(EMPTY_TABLE, M, 0, DROP)
    assert lookup(ft, MatchField(H, 1)) is None


@given(entries)
def test_lookup_returns_last_of_the_top_priority(es):
    ft = EMPTY_TABLE
    for prio, a in es:
        ft = put(ft, M, prio, a)
    if not es:
        assert lookup(ft, M) is None
        return
    top = max(p for p, _ in es)
    assert lookup(ft, M) == [a for p, a in es if p == top][-1]
    assert winning_priority(ft, M) == top


@given(entries, entries)
def test_puts_on_distinct_matches_commute(xs, ys):
    other = MatchField(PacketHeader("H1", "VIP"), 0)
    a = b = EMPTY_TABLE
    for p, x in xs:
        a = put(a, M, p, x)
    for p, y in ys:
        a = put(a, other, p, y)
    for p, y in ys:
        b = put(b, other, p, y)
    for p, x in xs:
        b = put(b, M, p, x)
    assert a == b


def test_only_drop_against_forward_conflicts():
    assert conflicting(DROP, to_host("R1"))
    assert not conflicting(to_host("R1"), to_switch("S2", 1))
    assert not conflicting(DROP, DROP)


def test_topology_rejects_port_reuse_and_double_attachment():
    with pytest.raises(TopologyError):
        topology([("S1", "H0", 0), ("S1", "H1", 0)])
    with pytest.raises(TopologyError):
        topology([("S1", "H0", 0), ("S2", "H0", 0)])
    with pytest.raises(TopologyError):
        topology([], [("S1", 1, "S1", 2)])


def test_ports_of_running_example():
    assert FIG1.switches == ["S1", "S2", "S3"]
    assert FIG1.ports("S1") == {0: ("host", "H0", -1), 1: ("switch", "S2", 1), 2: ("switch", "S3", 1)}
    assert not FIG1.are_neighbours("S2", "S3")


def test_shortest_path_installs_every_hop():
    assert shortest_path(FIG1, "S1", 0, "R1") == [Hop("S1", 0, to_switch("S2", 1)), Hop("S2", 1, to_host("R1"))]
    # from S2, the only way to R2 is back through S1
    assert [h.switch for h in shortest_path(FIG1, "S2", 0, "R2")] == ["S2", "S1", "S3"]


def test_shortest_path_prefers_direct_link_in_triangle():
    assert [h.switch for h in shortest_path(TRIANGLE, "S1", 0, "H2")] == ["S1", "S3"]


def test_shortest_path_to_local_host():
    assert shortest_path(FIG1, "S1", 1, "H0") == [Hop("S1", 1, to_host("H0"))]


def test_unreachable_host_has_no_path():
    top = topology([("S1", "H0", 0), ("S2", "H1", 0)])
    assert shortest_path(top, "S1", 0, "H1") is None
