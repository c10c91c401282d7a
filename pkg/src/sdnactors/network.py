"""Network vocabulary shared by the actor encoding and the reference semantics.

Packets, headers, match fields, forwarding actions, flow tables and the
switch/host topology all live here as immutable values so that both
executable models can hash, compare and share them freely.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

SSH = "SSH"
OTHER = "OTHER"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PacketHeader:
    src: str
    dst: str
    kind: str = OTHER

    def __str__(self) -> str:
        return f"{self.src}>{self.dst}/{self.kind}"


@dataclass(frozen=True, order=True)
class Packet:
    id: int
    header: PacketHeader


@dataclass(frozen=True, order=True)
class MatchField:
    header: PacketHeader
    port: int

    def matches(self, header: PacketHeader, port: int) -> bool:
        return self.header == header and self.port == port


@dataclass(frozen=True, order=True)
class Action:
    """Forwarding decision. ``kind`` is one of host, switch, drop."""

    kind: str
    target: str = ""
    port: int = -1

    @property
    def is_host(self) -> bool:
        return self.kind == "host"

    @property
    def is_switch(self) -> bool:
        return self.kind == "switch"

    @property
    def is_drop(self) -> bool:
        return self.kind == "drop"

    def __str__(self) -> str:
        if self.is_host:
            return f"->{self.target}"
        if self.is_switch:
            return f"->{self.target}:{self.port}"
        return "drop"


def to_host(host: str) -> Action:
    return Action("host", host)


def to_switch(switch: str, port: int) -> Action:
    return Action("switch", switch, port)


DROP = Action("drop")


def conflicting(a: Action, b: Action) -> bool:
    """Drop against forward; two forwards or two drops never conflict."""
    return a.is_drop != b.is_drop


@dataclass(frozen=True)
class FlowTable:
    """Prioritised exact-match table.

    Entries are grouped per match field, each group kept in insertion
    order. Lookup only ever consults one group, so the relative order of
    entries with different match fields carries no meaning and is not
    stored. Duplicate entries are kept.
    """

    groups: tuple[tuple[MatchField, tuple[tuple[int, Action], ...]], ...] = ()

    def entries_for(self, m: MatchField) -> tuple[tuple[int, Action], ...]:
        for key, entries in self.groups:
            if key == m:
                return entries
        return ()

    def __len__(self) -> int:
        return sum(len(e) for _, e in self.groups)

    def entries(self) -> list[tuple[MatchField, int, Action]]:
        return [(m, prio, a) for m, es in self.groups for prio, a in es]

    def matches(self) -> list[MatchField]:
        return [m for m, _ in self.groups]


def lookup(ft: FlowTable, m: MatchField) -> Action | None:
    best: tuple[int, Action] | None = None
    for prio, action in ft.entries_for(m):
        # later entries win ties
        if best is None or prio >= best[0]:
            best = (prio, action)
    return None if best is None else best[1]


def winning_priority(ft: FlowTable, m: MatchField) -> int | None:
    entries = ft.entries_for(m)
    return max(p for p, _ in entries) if entries else None


def put(ft: FlowTable, m: MatchField, priority: int, action: Action) -> FlowTable:
    groups = list(ft.groups)
    for i, (key, entries) in enumerate(groups):
        if key == m:
            groups[i] = (key, entries + ((priority, action),))
            break
    else:
        groups.append((m, ((priority, action),)))
        groups.sort(key=lambda g: g[0])
    return FlowTable(tuple(groups))


EMPTY_TABLE = FlowTable()


@dataclass(frozen=True, order=True)
class SHLink:
    switch: str
    host: str
    port: int


@dataclass(frozen=True, order=True)
class SSLink:
    s1: str
    p1: int
    s2: str
    p2: int


@dataclass(frozen=True)
class Topology:
    sh_links: tuple[SHLink, ...] = ()
    ss_links: tuple[SSLink, ...] = ()
    _ports: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sh_links", tuple(sorted(self.sh_links)))
        object.__setattr__(self, "ss_links", tuple(sorted(self.ss_links)))
        ports: dict[str, dict[int, tuple[str, str, int]]] = {}

        def claim(sw: str, port: int, peer: tuple[str, str, int]) -> None:
            table = ports.setdefault(sw, {})
            if port in table:
                raise TopologyError(f"port {port} of {sw} used by more than one link")
            table[port] = peer

        seen_hosts: set[str] = set()
        for link in self.sh_links:
            if link.host in seen_hosts:
                raise TopologyError(f"host {link.host} attached twice")
            seen_hosts.add(link.host)
            claim(link.switch, link.port, ("host", link.host, -1))
        for link in self.ss_links:
            if link.s1 == link.s2:
                raise TopologyError(f"self link on {link.s1}")
            claim(link.s1, link.p1, ("switch", link.s2, link.p2))
            claim(link.s2, link.p2, ("switch", link.s1, link.p1))
        for link in self.sh_links:
            if link.host in ports:
                raise TopologyError(f"{link.host} is both a switch and a host")
        self._ports.update(ports)

    @property
    def switches(self) -> list[str]:
        names = {l.switch for l in self.sh_links}
        for l in self.ss_links:
            names.update((l.s1, l.s2))
        return sorted(names)

    @property
    def hosts(self) -> list[str]:
        return sorted(l.host for l in self.sh_links)

    def host_link(self, host: str) -> SHLink:
        for l in self.sh_links:
            if l.host == host:
                return l
        raise TopologyError(f"unknown host {host}")

    def ports(self, switch: str) -> dict[int, tuple[str, str, int]]:
        """Port -> (peer kind, peer name, peer port) for one switch."""
        return dict(self._ports.get(switch, {}))

    def neighbours(self, switch: str) -> list[tuple[int, str, str, int]]:
        return sorted((p, kind, name, pp) for p, (kind, name, pp) in self._ports.get(switch, {}).items())

    def port_towards(self, switch: str, peer: str) -> int | None:
        for port, (_, name, _) in sorted(self._ports.get(switch, {}).items()):
            if name == peer:
                return port
        return None

    def are_neighbours(self, a: str, b: str) -> bool:
        return self.port_towards(a, b) is not None


def topology(sh: Iterable[tuple[str, str, int]] = (), ss: Iterable[tuple[str, int, str, int]] = ()) -> Topology:
    return Topology(tuple(SHLink(*l) for l in sh), tuple(SSLink(*l) for l in ss))


@dataclass(frozen=True)
class Hop:
    """One forwarding step: at ``switch``, packets entering on ``in_port`` take ``action``."""

    switch: str
    in_port: int
    action: Action


def shortest_path(top: Topology, start: str, in_port: int, host: str) -> list[Hop] | None:
    """Breadth-first hop list from ``start`` (entered on ``in_port``) to ``host``.

    Neighbours are expanded in ascending name order, which fixes the
    choice among equal-length paths.
    """
    target = top.host_link(host)
    if start not in top.switches:
        raise TopologyError(f"unknown switch {start}")
    parent: dict[str, str | None] = {start: None}
    queue = deque([start])
    while queue:
        sw = queue.popleft()
        if sw == target.switch:
            break
        peers = sorted((name, port) for port, kind, name, _ in top.neighbours(sw) if kind == "switch")
        for name, _ in peers:
            if name not in parent:
                parent[name] = sw
                queue.append(name)
    if target.switch not in parent:
        return None
    chain = [target.switch]
    while parent[chain[-1]] is not None:
        chain.append(parent[chain[-1]])
    chain.reverse()
    hops: list[Hop] = []
    port = in_port
    for here, nxt in zip(chain, chain[1:]):
        out = top.port_towards(here, nxt)
        arrive = top.ports(here)[out][2]
        hops.append(Hop(here, port, to_switch(nxt, arrive)))
        port = arrive
    hops.append(Hop(target.switch, port, to_host(host)))
    return hops
