"""Controller policies for the benchmark families.

Every policy is a pure function of ``(spec, state, topology, sid, port,
header)``. The actor controller and the reference semantics call the same
:func:`apply_policy`, so the two models cannot drift apart on what the
controller decides.

Families
--------
LB, LBB
    Round-robin load balancer per virtual address; rules along the whole
    shortest path to the chosen replica. LBB runs on the barrier controller.
SSH_BUGGY, SSH_CORRECT, SSHB
    Forward everything toward the destination, and drop SSH traffic at the
    ingress. The buggy variant gives both rules the same priority.
LE
    Learning switch with authentication; unknown destinations are flooded.
MI, MIB
    Firewall with migration of trusted hosts. MIB skips the trust check on
    events from untrusted ports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .network import (
    DROP,
    Action,
    MatchField,
    PacketHeader,
    SSH,
    Topology,
    TopologyError,
    shortest_path,
)


class Family(str, Enum):
    LB = "LB"
    LBB = "LBB"
    SSH_BUGGY = "SSH_BUGGY"
    SSH_CORRECT = "SSH_CORRECT"
    SSHB = "SSHB"
    LE = "LE"
    MI = "MI"
    MIB = "MIB"

    @property
    def uses_barriers(self) -> bool:
        return self in (Family.LBB, Family.SSHB, Family.LE)


def _freeze(value: Any) -> Any:
    if isinstance(value, Mapping):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class PolicySpec:
    family: Family
    params: tuple = ()

    @staticmethod
    def of(family: Family | str, **params: Any) -> "PolicySpec":
        return PolicySpec(Family(family), _freeze(params))

    def param(self, name: str, default: Any = None) -> Any:
        for k, v in self.params:
            if k == name:
                return v
        return default

    def params_dict(self) -> dict:
        def thaw(v: Any) -> Any:
            if isinstance(v, tuple) and v and all(isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], str) for x in v):
                return {k: thaw(x) for k, x in v}
            if isinstance(v, tuple):
                return [thaw(x) for x in v]
            return v

        return {k: thaw(v) for k, v in self.params}


@dataclass(frozen=True)
class PolicyState:
    """Immutable key/value store for controller policy data.

    Keys are tuples whose first element names the table, e.g.
    ``("rr", vip)`` or ``("trusted", host)``.
    """

    items: tuple = ()

    def get(self, key: tuple, default: Any = None) -> Any:
        for k, v in self.items:
            if k == key:
                return v
        return default

    def set(self, key: tuple, value: Any) -> "PolicyState":
        rest = [(k, v) for k, v in self.items if k != key]
        rest.append((key, value))
        return PolicyState(tuple(sorted(rest)))

    def keys(self, table: str) -> list:
        return [k[1] for k, _ in self.items if k[0] == table]

    def as_dict(self) -> dict:
        return {"/".join(map(str, k)): v for k, v in self.items}


@dataclass(frozen=True, order=True)
class Directive:
    switch: str
    match: MatchField
    priority: int
    action: Action


class _Flood:
    """Marker telling the controller to flood the buffered packet."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "FLOOD"

    def __reduce__(self):
        return (_Flood, ())


FLOOD = _Flood()


@dataclass
class PolicyTrace:
    """Keys of the policy state touched by one decision."""

    reads: set = field(default_factory=set)
    writes: set = field(default_factory=set)


class _Tracked:
    def __init__(self, state: PolicyState, trace: PolicyTrace):
        self.state = state
        self.trace = trace

    def get(self, key: tuple, default: Any = None) -> Any:
        self.trace.reads.add(key)
        return self.state.get(key, default)

    def set(self, key: tuple, value: Any) -> None:
        self.trace.writes.add(key)
        self.state = self.state.set(key, value)


def initial_policy_state(spec: PolicySpec, top: Topology) -> PolicyState:
    st = PolicyState()
    if spec.family == Family.LE:
        for host in spec.param("authenticated", ()) or ():
            st = st.set(("auth", host), True)
    if spec.family in (Family.MI, Family.MIB):
        for host in spec.param("trusted", ()) or ():
            st = st.set(("trusted", host), True)
    return st


def _path_rules(top: Topology, sid: str, o: int, ph: PacketHeader, dest: str, priority: int = 0) -> list[Directive]:
    hops = shortest_path(top, sid, o, dest)
    if hops is None:
        return []
    return [Directive(h.switch, MatchField(ph, h.in_port), priority, h.action) for h in hops]


def _services(spec: PolicySpec) -> dict[str, list[str]]:
    services = spec.param("services")
    if services:
        return {vip: list(reps) for vip, reps in services}
    vip = spec.param("vip", "VIP")
    return {vip: list(spec.param("replicas", ()))}


def _load_balancer(spec, st: _Tracked, top, sid, o, ph) -> list:
    services = _services(spec)
    if ph.dst not in services:
        # not addressed to a virtual service: plain shortest path if the host exists
        return _path_rules(top, sid, o, ph, ph.dst) if ph.dst in top.hosts else []
    replicas = services[ph.dst]
    if not replicas:
        return []
    turn = st.get(("rr", ph.dst), 0)
    st.set(("rr", ph.dst), (turn + 1) % len(replicas))
    return _path_rules(top, sid, o, ph, replicas[turn])


def _ssh(spec, st, top, sid, o, ph, drop_priority: int) -> list:
    rules = _path_rules(top, sid, o, ph, ph.dst) if ph.dst in top.hosts else []
    if ph.kind == SSH:
        rules.append(Directive(sid, MatchField(ph, o), drop_priority, DROP))
    return rules


def _learning(spec, st: _Tracked, top, sid, o, ph) -> list:
    if st.get(("learned", ph.src)) is None:
        st.set(("learned", ph.src), (sid, o))
    server = spec.param("auth_server")
    if server is not None and ph.dst == server and not st.get(("auth", ph.src), False):
        st.set(("auth", ph.src), True)
    if not st.get(("auth", ph.src), False):
        return []
    if st.get(("learned", ph.dst)) is not None and ph.dst in top.hosts:
        return _path_rules(top, sid, o, ph, ph.dst)
    return [FLOOD]


def _firewall(spec, st: _Tracked, top, sid, o, ph, check_untrusted: bool) -> list:
    trusted_port = spec.param("trusted_port", 1)
    if o == trusted_port:
        st.set(("trusted", ph.src), True)
        st.set(("trusted", ph.dst), True)
    elif check_untrusted and not st.get(("trusted", ph.src), False):
        return []
    if ph.dst not in top.hosts:
        return []
    return _path_rules(top, sid, o, ph, ph.dst)


def apply_policy_traced(
    spec: PolicySpec, ps: PolicyState, top: Topology, sid: str, o: int, ph: PacketHeader
) -> tuple[list, PolicyState, PolicyTrace]:
    if sid not in top.switches:
        raise TopologyError(f"unknown switch {sid}")
    trace = PolicyTrace()
    st = _Tracked(ps, trace)
    fam = spec.family
    if fam in (Family.LB, Family.LBB):
        out = _load_balancer(spec, st, top, sid, o, ph)
    elif fam == Family.SSH_BUGGY:
        out = _ssh(spec, st, top, sid, o, ph, drop_priority=0)
    elif fam in (Family.SSH_CORRECT, Family.SSHB):
        out = _ssh(spec, st, top, sid, o, ph, drop_priority=1)
    elif fam == Family.LE:
        out = _learning(spec, st, top, sid, o, ph)
    elif fam == Family.MI:
        out = _firewall(spec, st, top, sid, o, ph, check_untrusted=True)
    elif fam == Family.MIB:
        out = _firewall(spec, st, top, sid, o, ph, check_untrusted=False)
    else:  # pragma: no cover
        raise ValueError(fam)
    return out, st.state, trace


def apply_policy(
    spec: PolicySpec, ps: PolicyState, top: Topology, sid: str, o: int, ph: PacketHeader
) -> tuple[list, PolicyState]:
    directives, new_state, _ = apply_policy_traced(spec, ps, top, sid, o, ph)
    return directives, new_state


def split_flood(directives: Iterable) -> tuple[list[Directive], bool]:
    items = list(directives)
    rules = [d for d in items if d is not FLOOD]
    return rules, len(rules) != len(items)
