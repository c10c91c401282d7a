"""Reference network semantics, executed directly on network states.

A network state holds hosts, switches and the controller, each with an
input channel (a multiset of items). One transition consumes one channel
item. The controller decision goes through the same policy function as the
actor model, so the two models only differ in how they are encoded.

Besides the six textbook transitions this oracle also knows the pieces the
actor model needs for the benchmarks: drop actions, flooding, delivery and
drop logs, and the loop/conflict flags. Packet-out items name the packet
id and ingress port, because with several buffered packets of the same
header the header alone does not say which one to release.

Channel items::

    ("new", p)                 host: packet fed into the network
    ("deliver", p)             host: packet addressed to this host
    ("pkt", o, p)              switch: packet arriving on port o
    ("mod", m, prio, a)        switch: rule to install
    ("pktOut", pid, o)         switch: release packet buffered from port o
    ("flood", pid, o)          switch: flood packet buffered from port o
    ("pktIn", sid, o, pid, ph) controller: table miss
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .network import EMPTY_TABLE, FlowTable, MatchField, Packet, Topology, TopologyError, lookup, put
from .policies import PolicySpec, PolicyState, apply_policy, initial_policy_state, split_flood
from .properties import CONTRADICTORY_RULES, FORWARDING_LOOP, conflict_message, first_conflict, loop_message
from .runtime import Config, RuntimeFault


def _bag(items: Iterable) -> tuple:
    return tuple(sorted(items, key=repr))


def _remove(bag: tuple, item) -> tuple:
    i = bag.index(item)
    return bag[:i] + bag[i + 1 :]


@dataclass(frozen=True)
class HostState:
    id: str
    sid: str
    port: int
    inbox: tuple = ()
    delivered: tuple = ()


@dataclass(frozen=True)
class SwitchState:
    id: str
    ft: FlowTable = EMPTY_TABLE
    buffer: tuple = ()  # sorted (pid, port, packet)
    inbox: tuple = ()
    dropped: tuple = ()
    seen: frozenset = frozenset()


@dataclass(frozen=True)
class ControllerState:
    top: Topology
    spec: PolicySpec
    policy: PolicyState
    inbox: tuple = ()


@dataclass(frozen=True)
class NetworkState:
    hosts: tuple
    switches: tuple
    controller: ControllerState
    errors: tuple = ()
    detect_loops: bool = False
    detect_conflicts: bool = False

    def host(self, name: str) -> HostState:
        for h in self.hosts:
            if h.id == name:
                return h
        raise KeyError(name)

    def switch(self, name: str) -> SwitchState:
        for s in self.switches:
            if s.id == name:
                return s
        raise KeyError(name)

    @property
    def quiescent(self) -> bool:
        return not self.controller.inbox and all(not h.inbox for h in self.hosts) and all(not s.inbox for s in self.switches)


def initial_state(
    top: Topology,
    spec: PolicySpec,
    injections: Sequence = (),
    *,
    detect_loops: bool = False,
    detect_conflicts: bool = False,
) -> NetworkState:
    inbox: dict[str, list] = {h: [] for h in top.hosts}
    for inj in injections:
        host, p = (inj.host, inj.packet) if hasattr(inj, "host") else inj
        if host not in inbox:
            raise TopologyError(f"injection at unknown host {host}")
        inbox[host].append(("new", p))
    hosts = tuple(
        HostState(h, top.host_link(h).switch, top.host_link(h).port, _bag(inbox[h])) for h in top.hosts
    )
    switches = tuple(SwitchState(s) for s in top.switches)
    ctrl = ControllerState(top, spec, initial_policy_state(spec, top))
    return NetworkState(hosts, switches, ctrl, (), detect_loops, detect_conflicts)


class _Edit:
    """Mutable scratch copy of a state for building one successor."""

    def __init__(self, st: NetworkState):
        self.st = st
        self.hosts = {h.id: h for h in st.hosts}
        self.switches = {s.id: s for s in st.switches}
        self.ctrl = st.controller
        self.errors = list(st.errors)

    def to_host(self, name: str, item) -> None:
        h = self.hosts[name]
        self.hosts[name] = replace(h, inbox=_bag(h.inbox + (item,)))

    def to_switch(self, name: str, item) -> None:
        s = self.switches[name]
        self.switches[name] = replace(s, inbox=_bag(s.inbox + (item,)))

    def forward(self, sid: str, p: Packet, action) -> str:
        if action.is_host:
            self.to_host(action.target, ("deliver", p))
            return "host"
        if action.is_switch:
            self.to_switch(action.target, ("pkt", action.port, p))
            return "switch"
        s = self.switches[sid]
        self.switches[sid] = replace(s, dropped=_bag(s.dropped + (p.id,)))
        return "drop"

    def done(self) -> NetworkState:
        return NetworkState(
            tuple(self.hosts[k] for k in sorted(self.hosts)),
            tuple(self.switches[k] for k in sorted(self.switches)),
            self.ctrl,
            tuple(sorted(self.errors)),
            self.st.detect_loops,
            self.st.detect_conflicts,
        )


def _host_rules(st: NetworkState, h: HostState, item) -> tuple[str, NetworkState]:
    ed = _Edit(st)
    ed.hosts[h.id] = replace(h, inbox=_remove(h.inbox, item))
    if item[0] == "new":
        ed.to_switch(h.sid, ("pkt", h.port, item[1]))
        return "si", ed.done()
    h2 = ed.hosts[h.id]
    ed.hosts[h.id] = replace(h2, delivered=_bag(h2.delivered + (item[1],)))
    return "hhp", ed.done()


def _take(s: SwitchState, pid: int, o: int) -> tuple[SwitchState, Packet]:
    for entry in s.buffer:
        if entry[:2] == (pid, o):
            return replace(s, buffer=_remove(s.buffer, entry)), entry[2]
    raise RuntimeFault(f"{s.id} has no packet {pid} buffered from port {o}")


def _switch_rules(st: NetworkState, s: SwitchState, item) -> tuple[str, NetworkState]:
    ed = _Edit(st)
    s = replace(s, inbox=_remove(s.inbox, item))
    kind = item[0]
    if kind == "pkt":
        _, o, p = item
        if st.detect_loops:
            if p.id in s.seen:
                ed.switches[s.id] = s
                ed.errors.append((FORWARDING_LOOP, loop_message(p.id, s.id)))
                return "shp_loop", ed.done()
            s = replace(s, seen=s.seen | {p.id})
        ed.switches[s.id] = s
        action = lookup(s.ft, MatchField(p.header, o))
        if action is None:
            ed.switches[s.id] = replace(s, buffer=_bag(s.buffer + ((p.id, o, p),)))
            ed.ctrl = replace(ed.ctrl, inbox=_bag(ed.ctrl.inbox + (("pktIn", s.id, o, p.id, p.header),)))
            return "shp3", ed.done()
        how = ed.forward(s.id, p, action)
        return {"host": "shp1", "switch": "shp2", "drop": "shp_drop"}[how], ed.done()
    if kind == "pktOut":
        _, pid, o = item
        s, p = _take(s, pid, o)
        ed.switches[s.id] = s
        action = lookup(s.ft, MatchField(p.header, o))
        if action is None:
            ed.switches[s.id] = replace(s, dropped=_bag(s.dropped + (p.id,)))
            return "so3", ed.done()
        how = ed.forward(s.id, p, action)
        return {"host": "so1", "switch": "so2", "drop": "so_drop"}[how], ed.done()
    if kind == "flood":
        _, pid, o = item
        s, p = _take(s, pid, o)
        ed.switches[s.id] = s
        for port, (pk, name, peer_port) in sorted(st.controller.top.ports(s.id).items()):
            if port == o:
                continue
            if pk == "host":
                ed.to_host(name, ("deliver", p))
            else:
                ed.to_switch(name, ("pkt", peer_port, p))
        return "flood", ed.done()
    if kind == "mod":
        _, m, prio, a = item
        if st.detect_conflicts:
            other = first_conflict(s.ft, m, prio, a)
            if other is not None:
                ed.errors.append((CONTRADICTORY_RULES, conflict_message(s.id, other, a, m, prio)))
        ed.switches[s.id] = replace(s, ft=put(s.ft, m, prio, a))
        return "shm", ed.done()
    raise ValueError(f"unknown switch item {item!r}")


def _controller_rule(st: NetworkState, item) -> tuple[str, NetworkState]:
    ed = _Edit(st)
    c = st.controller
    _, sid, o, pid, ph = item
    directives, policy = apply_policy(c.spec, c.policy, c.top, sid, o, ph)
    rules, flood = split_flood(directives)
    ed.ctrl = replace(c, inbox=_remove(c.inbox, item), policy=policy)
    for d in rules:
        if d.switch not in ed.switches:
            raise TopologyError(f"directive for unknown switch {d.switch}")
        ed.to_switch(d.switch, ("mod", d.match, d.priority, d.action))
    ed.to_switch(sid, ("flood" if flood else "pktOut", pid, o))
    return "chm", ed.done()


def successors(st: NetworkState) -> set[tuple[str, NetworkState]]:
    """Every state one transition away, tagged with the rule used."""
    out = set()
    for h in st.hosts:
        for item in set(h.inbox):
            out.add(_host_rules(st, h, item))
    for s in st.switches:
        for item in set(s.inbox):
            out.add(_switch_rules(st, s, item))
    for item in set(st.controller.inbox):
        out.add(_controller_rule(st, item))
    return out


@dataclass
class FinalStates:
    finals: set
    bound_hits: int
    explored: int


def default_step_bound(st: NetworkState) -> int:
    packets = sum(1 for h in st.hosts for it in h.inbox if it[0] == "new")
    return 10 * max(1, packets) * max(1, len(st.switches))


def enumerate_final_states(
    st: NetworkState, step_bound: int | None = None, max_states: int | None = None
) -> FinalStates:
    """Quiescent states reachable within ``step_bound`` transitions.

    States still holding channel items at the bound are counted in
    ``bound_hits`` and left out of ``finals``. More than ``max_states``
    distinct states raises :class:`~sdnactors.dpor.InstanceTooLarge`.
    """
    bound = default_step_bound(st) if step_bound is None else step_bound
    if bound <= 0:
        raise ValueError("step_bound must be positive")
    seen = {st}
    frontier = deque([(st, 0)])
    finals: set = set()
    hits = 0
    while frontier:
        cur, depth = frontier.popleft()
        if cur.quiescent:
            finals.add(cur)
            continue
        if depth >= bound:
            hits += 1
            continue
        for _, nxt in successors(cur):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, depth + 1))
        if max_states is not None and len(seen) > max_states:
            from .dpor import InstanceTooLarge

            raise InstanceTooLarge(f"oracle passed {max_states} distinct states")
    return FinalStates(finals, hits, len(seen))


# relating actor configurations to network states ------------------------------


_CHANNEL = {
    "sendIn": lambda a: ("new", a[0]),
    "hostHandlePacket": lambda a: ("deliver", a[0]),
    "switchHandlePacket": lambda a: ("pkt", a[1], a[0]),
    "switchHandleMessage": lambda a: ("mod", a[0], a[1], a[2]),
    "sendOut": lambda a: ("pktOut", a[0], a[1]),
    "flood": lambda a: ("flood", a[0], a[1]),
    "controlHandleMessage": lambda a: ("pktIn",) + tuple(a),
}


class NotComparable(ValueError):
    pass


def _pending_items(cfg: Config, aid: int) -> tuple:
    items = []
    for t in cfg.queue(aid):
        if t.finished:
            continue
        if t.pc != "entry":
            raise NotComparable(f"task {t.id} ({t.method}) is suspended mid-body")
        items.append(_CHANNEL[t.method](t.args))
    return _bag(items)


def related(cfg: Config) -> bool:
    """Controller heap covers the topology and every actor points at the controller."""
    ctrl = cfg.actors[0]
    top: Topology = ctrl.heap["ntw"]
    srefs, hrefs = ctrl.heap["srefs"], ctrl.heap["hrefs"]
    if sorted(srefs) != top.switches or sorted(hrefs) != top.hosts:
        return False
    for name, aid in {**srefs, **hrefs}.items():
        if cfg.actors[aid].name != name:
            return False
    return all(a.heap.get("ctrl", 0) == 0 for a in cfg.actors if a.kind == "Switch")


def abstract(cfg: Config) -> NetworkState:
    """The network state an actor configuration stands for."""
    ctrl = cfg.actors[0]
    if ctrl.heap.get("barriers"):
        raise NotComparable("barrier controllers have no counterpart in the network semantics")
    hosts, switches, detect_loops, detect_conflicts = [], [], False, False
    for a in cfg.actors[1:]:
        if a.kind == "Host":
            sname = cfg.actors[a.heap["switch"]].name
            hosts.append(HostState(a.name, sname, a.heap["port"], _pending_items(cfg, a.id), a.heap["delivered"]))
        else:
            buf = _bag((pid, o, p) for (pid, o), (p, n) in a.heap["buffer"].items() for _ in range(n))
            switches.append(
                SwitchState(a.name, a.heap["flowT"], buf, _pending_items(cfg, a.id), a.heap["dropped"], frozenset(a.heap["seen"]))
            )
            detect_loops = a.heap["detect_loops"]
            detect_conflicts = a.heap["detect_conflicts"]
    c = ControllerState(ctrl.heap["ntw"], ctrl.heap["spec"], ctrl.heap["policy"], _pending_items(cfg, ctrl.id))
    return NetworkState(
        tuple(sorted(hosts, key=lambda h: h.id)),
        tuple(sorted(switches, key=lambda s: s.id)),
        c,
        tuple(sorted(cfg.errors)),
        detect_loops,
        detect_conflicts,
    )


def equivalent(st: NetworkState, cfg: Config) -> bool:
    """Hosts, switches and controller agree, channels matching pending tasks one to one.

    Channels and task queues are compared as multisets of items, which holds
    exactly when a one-to-one pairing of items and tasks exists.
    """
    try:
        return related(cfg) and abstract(cfg) == st
    except NotComparable:
        return False


@dataclass
class CrosscheckReport:
    match: bool
    oracle_finals: int
    actor_finals: int
    actor_classes: int
    matched: int
    oracle_bound_hits: int
    actor_bound_hits: int
    unmatched_oracle: list
    unmatched_actor: list


def perfect_matching(left: Sequence, right: Sequence, same) -> tuple[int, list[int], list[int]]:
    """Size of a maximum matching under ``same`` and the unmatched indices on each side."""
    if not left or not right:
        return 0, list(range(len(left))), list(range(len(right)))
    rows, cols = [], []
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            if same(a, b):
                rows.append(i)
                cols.append(j)
    graph = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(len(left), len(right)))
    match = maximum_bipartite_matching(graph, perm_type="column")
    matched_rows = [i for i in range(len(left)) if match[i] >= 0]
    used = {int(match[i]) for i in matched_rows}
    return (
        len(matched_rows),
        [i for i in range(len(left)) if match[i] < 0],
        [j for j in range(len(right)) if j not in used],
    )


def crosscheck(
    top: Topology,
    spec: PolicySpec,
    injections: Sequence = (),
    *,
    detect_loops: bool = False,
    detect_conflicts: bool = False,
    barriers: bool | None = None,
    step_bound: int | None = None,
    max_states: int = 200_000,
) -> CrosscheckReport:
    """Compare the oracle's final states with the actor model's, one to one."""
    from .dpor import ExplorationOptions, enumerate_all
    from .encoding import build_initial_config

    if spec.family.uses_barriers if barriers is None else barriers:
        raise NotComparable("the barrier controller has no counterpart in the network semantics")
    st0 = initial_state(top, spec, injections, detect_loops=detect_loops, detect_conflicts=detect_conflicts)
    bound = default_step_bound(st0) if step_bound is None else step_bound
    oracle = enumerate_final_states(st0, bound, max_states)
    cfg0 = build_initial_config(
        top, spec, injections, barriers=False, detect_loops=detect_loops, detect_conflicts=detect_conflicts
    )
    actors = enumerate_all(cfg0, ExplorationOptions(max_depth=bound), max_states=max_states)
    actor_cfgs = [actors.finals[fp] for fp in sorted(actors.final_fingerprints)]
    # configurations differing only in finished bookkeeping are one network state
    classes: dict[NetworkState, Config] = {}
    for cfg in actor_cfgs:
        classes.setdefault(abstract(cfg), cfg)
    left = sorted(oracle.finals, key=repr)
    right = list(classes.values())
    size, lo, ro = perfect_matching(left, right, equivalent)
    ok = size == len(left) == len(right)
    return CrosscheckReport(
        ok,
        len(left),
        len(actor_cfgs),
        len(right),
        size,
        oracle.bound_hits,
        actors.depth_exhausted,
        [left[i] for i in lo],
        [right[j] for j in ro],
    )
