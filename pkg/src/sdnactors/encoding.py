"""Hosts, switches and the controller as actors, plus the initial configuration.

Heap layout
-----------
host        name, switch (actor id), port, delivered (multiset of packets)
switch      sid, ctrl, refs (name -> actor id), ports, flowT,
            buffer ((packet id, in-port) -> (packet, copies)),
            dropped (multiset of packet ids), seen (packet ids) and the
            two monitor switches detect_loops / detect_conflicts
controller  srefs, hrefs, ntw, spec, policy, barriers, barrierMap, barrierOn

Accesses are recorded per table entry: flow-table reads and writes are
keyed by match field, buffer and seen-set accesses by packet id, policy
accesses by policy key. The explorer decides how much of that key
information to use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .network import (
    EMPTY_TABLE,
    Action,
    MatchField,
    Packet,
    PacketHeader,
    Topology,
    TopologyError,
    lookup,
    put,
)
from .properties import CONTRADICTORY_RULES, FORWARDING_LOOP, conflict_message, first_conflict, loop_message
from .policies import PolicySpec, apply_policy_traced, initial_policy_state, split_flood
from .runtime import Actor, Config, RuntimeFault, StepContext, Task, behavior

CONTROLLER = 0

SEND_IN = "sendIn"
HOST_HANDLE = "hostHandlePacket"
SWITCH_HANDLE = "switchHandlePacket"
SEND_OUT = "sendOut"
INSTALL = "switchHandleMessage"
FLOOD = "flood"
CONTROL = "controlHandleMessage"


@dataclass(frozen=True)
class Injection:
    host: str
    packet: Packet


# hosts ------------------------------------------------------------------------


@behavior(SEND_IN)
def send_in(ctx: StepContext, args: tuple, pc: str, loc: dict):
    (p,) = args
    ctx.spawn(ctx.const("switch"), SWITCH_HANDLE, p, ctx.const("port"))
    return None


@behavior(HOST_HANDLE)
def host_handle_packet(ctx: StepContext, args: tuple, pc: str, loc: dict):
    (p,) = args
    ctx.append("delivered", p, p.id)
    ctx.event("deliver", ctx.const("name"), p.id)
    return None


# switches ---------------------------------------------------------------------


def _apply(ctx: StepContext, p: Packet, action: Action) -> None:
    refs = ctx.const("refs")
    if action.is_host:
        ctx.spawn(refs[action.target], HOST_HANDLE, p)
    elif action.is_switch:
        ctx.spawn(refs[action.target], SWITCH_HANDLE, p, action.port)
    else:
        _drop(ctx, p)


def _drop(ctx: StepContext, p: Packet) -> None:
    ctx.append("dropped", p.id, p.id)
    ctx.event("drop", ctx.const("sid"), p.id)


@behavior(SWITCH_HANDLE)
def switch_handle_packet(ctx: StepContext, args: tuple, pc: str, loc: dict):
    p, o = args
    sid = ctx.const("sid")
    if ctx.const("detect_loops"):
        seen = ctx.read("seen", p.id)
        if p.id in seen:
            # the packet is discarded once the loop is reported
            ctx.violation(FORWARDING_LOOP, loop_message(p.id, sid))
            ctx.event("loop", sid, p.id)
            return None
        ctx.write("seen", seen | {p.id}, p.id)
    m = MatchField(p.header, o)
    action = lookup(ctx.read("flowT", m), m)
    if action is not None:
        _apply(ctx, p, action)
        return None
    # flooding can bring several copies of one packet in on the same port
    key = (p.id, o)
    buffer = ctx.read("buffer", key)
    copies = buffer[key][1] if key in buffer else 0
    ctx.write("buffer", {**buffer, key: (p, copies + 1)}, key)
    ctx.spawn(ctx.const("ctrl"), CONTROL, sid, o, p.id, p.header)
    return None


def _take(ctx: StepContext, pid: int, o: int) -> Packet:
    key = (pid, o)
    buffer = ctx.read("buffer", key)
    if key not in buffer:
        raise RuntimeFault(f"{ctx.const('sid')} has no packet {pid} buffered from port {o}")
    p, copies = buffer[key]
    rest = {k: v for k, v in buffer.items() if k != key}
    if copies > 1:
        rest[key] = (p, copies - 1)
    ctx.write("buffer", rest, key)
    return p


@behavior(SEND_OUT)
def send_out(ctx: StepContext, args: tuple, pc: str, loc: dict):
    pid, o = args
    p = _take(ctx, pid, o)
    m = MatchField(p.header, o)
    action = lookup(ctx.read("flowT", m), m)
    if action is None:
        _drop(ctx, p)
    else:
        _apply(ctx, p, action)
    return None


@behavior(INSTALL)
def switch_handle_message(ctx: StepContext, args: tuple, pc: str, loc: dict):
    m, prio, action = args
    ft = ctx.read("flowT", m)
    if ctx.const("detect_conflicts"):
        other = first_conflict(ft, m, prio, action)
        if other is not None:
            ctx.violation(CONTRADICTORY_RULES, conflict_message(ctx.const("sid"), other, action, m, prio))
    ctx.write("flowT", put(ft, m, prio, action), m)
    ctx.event("install", ctx.const("sid"), m, prio, action)
    return None


@behavior(FLOOD)
def switch_flood(ctx: StepContext, args: tuple, pc: str, loc: dict):
    pid, o = args
    p = _take(ctx, pid, o)
    refs = ctx.const("refs")
    for port, (kind, name, peer_port) in sorted(ctx.const("ports").items()):
        if port == o:
            continue
        if kind == "host":
            ctx.spawn(refs[name], HOST_HANDLE, p)
        else:
            ctx.spawn(refs[name], SWITCH_HANDLE, p, peer_port)
    return None


# controller -------------------------------------------------------------------


def decide(ctx: StepContext, sid: str, o: int, ph: PacketHeader) -> tuple[list, bool]:
    """Run the policy on the controller heap, recording which policy keys were used."""
    directives, new_state, trace = apply_policy_traced(
        ctx.const("spec"), ctx.const("policy"), ctx.const("ntw"), sid, o, ph
    )
    for key in sorted(trace.reads - trace.writes, key=repr):
        ctx.touch("policy", key, "r")
    for key in sorted(trace.writes, key=repr):
        ctx.touch("policy", key, "w")
    ctx.heap["policy"] = new_state
    rules, flood = split_flood(directives)
    srefs = ctx.const("srefs")
    for d in rules:
        if d.switch not in srefs:
            raise TopologyError(f"directive for unknown switch {d.switch}")
    return rules, flood


@behavior(CONTROL)
def control_handle_message(ctx: StepContext, args: tuple, pc: str, loc: dict):
    if ctx.const("barriers"):
        from .barriers import barrier_control

        return barrier_control(ctx, args, pc, loc)
    sid, o, pid, ph = args
    rules, flood = decide(ctx, sid, o, ph)
    srefs = ctx.const("srefs")
    for d in rules:
        ctx.spawn(srefs[d.switch], INSTALL, d.match, d.priority, d.action)
    ctx.spawn(srefs[sid], FLOOD if flood else SEND_OUT, pid, o)
    return None


# initial configuration --------------------------------------------------------


def build_initial_config(
    top: Topology,
    spec: PolicySpec,
    injections: Sequence[Injection] | Iterable[tuple[str, Packet]] = (),
    *,
    barriers: bool | None = None,
    detect_loops: bool = False,
    detect_conflicts: bool = False,
    faulty_barriers: bool = False,
) -> Config:
    injections = [i if isinstance(i, Injection) else Injection(*i) for i in injections]
    if barriers is None:
        barriers = spec.family.uses_barriers
    switches = top.switches
    hosts = top.hosts
    for inj in injections:
        if inj.host not in hosts:
            raise TopologyError(f"injection at unknown host {inj.host}")
    ids = [inj.packet.id for inj in injections]
    if len(set(ids)) != len(ids):
        raise ValueError("packet ids must be unique")

    srefs = {s: 1 + i for i, s in enumerate(switches)}
    hrefs = {h: 1 + len(switches) + i for i, h in enumerate(hosts)}
    refs = {**srefs, **hrefs}
    actors = [
        Actor(
            CONTROLLER,
            "Controller",
            "ctrl",
            {
                "srefs": srefs,
                "hrefs": hrefs,
                "ntw": top,
                "spec": spec,
                "policy": initial_policy_state(spec, top),
                "barriers": barriers,
                "faulty_barriers": faulty_barriers,
                "barrierMap": {},
                "barrierOn": frozenset(),
            },
        )
    ]
    for s in switches:
        actors.append(
            Actor(
                srefs[s],
                "Switch",
                s,
                {
                    "sid": s,
                    "ctrl": CONTROLLER,
                    "refs": refs,
                    "ports": top.ports(s),
                    "flowT": EMPTY_TABLE,
                    "buffer": {},
                    "dropped": (),
                    "seen": frozenset(),
                    "detect_loops": detect_loops,
                    "detect_conflicts": detect_conflicts,
                },
            )
        )
    for h in hosts:
        link = top.host_link(h)
        actors.append(
            Actor(hrefs[h], "Host", h, {"name": h, "switch": srefs[link.switch], "port": link.port, "delivered": ()})
        )
    tasks = {}
    for i, inj in enumerate(injections):
        tasks[i] = Task(i, hrefs[inj.host], SEND_IN, (inj.packet,))
    return Config(tuple(actors), tasks, len(tasks), ())


def make_injections(spec: Iterable[tuple[str, PacketHeader, int]], start: int = 0) -> list[Injection]:
    """Expand (host, header, count) triples into packets with fresh ids."""
    out: list[Injection] = []
    pid = start
    for host, header, count in spec:
        for _ in range(count):
            out.append(Injection(host, Packet(pid, header)))
            pid += 1
    return out


def switch_names(cfg: Config) -> dict[int, str]:
    return {a.id: a.name for a in cfg.actors if a.kind == "Switch"}


def delivered(cfg: Config) -> dict[str, tuple[Packet, ...]]:
    return {a.name: a.heap["delivered"] for a in cfg.actors if a.kind == "Host"}


def dropped(cfg: Config) -> dict[str, tuple[int, ...]]:
    return {a.name: a.heap["dropped"] for a in cfg.actors if a.kind == "Switch"}


def flow_tables(cfg: Config) -> dict:
    return {a.name: a.heap["flowT"] for a in cfg.actors if a.kind == "Switch"}
