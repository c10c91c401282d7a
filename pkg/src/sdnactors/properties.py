"""Property monitors.

Two kinds of monitor exist. In-step monitors run inside switch macro-steps
(loop detection in ``switchHandlePacket``, rule conflicts in
``switchHandleMessage``); they are switched on through flags in the switch
heaps and report through the configuration's error flag. Final-state
monitors are predicates over a finished configuration and are evaluated by
the explorer at every leaf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .network import SSH, FlowTable, MatchField, Topology, conflicting, lookup
from .policies import Family
from .runtime import Config

FORWARDING_LOOP = "forwarding_loop"
CONTRADICTORY_RULES = "contradictory_rules"
SAFETY_DELIVERY = "safety_delivery"
FLOWTABLE_CONSISTENCY = "flowtable_consistency"


def loop_message(pid: int, sid: str) -> str:
    return f"packet {pid} reached {sid} twice"


def conflict_message(sid: str, old, new, m: MatchField, prio: int) -> str:
    return f"{sid} got {old} and {new} for {m.header}@{m.port} at priority {prio}"


def first_conflict(ft: FlowTable, m: MatchField, prio: int, action) -> object | None:
    """An installed action that contradicts ``action`` at the same entry and priority."""
    for other_prio, other in ft.entries_for(m):
        if other_prio == prio and conflicting(other, action):
            return other
    return None


@dataclass(frozen=True)
class PropertyMonitor:
    name: str
    description: str
    in_step: bool
    final: Callable[[Config], list[str]] | None = None


def _controller(cfg: Config):
    return cfg.actors[0]


def _hosts(cfg: Config):
    return [a for a in cfg.actors if a.kind == "Host"]


def safety_delivery(cfg: Config) -> list[str]:
    """Deliveries the controller's policy should have prevented."""
    ctrl = _controller(cfg).heap
    spec = ctrl["spec"]
    top: Topology = ctrl["ntw"]
    policy = ctrl["policy"]
    out = []
    for host in _hosts(cfg):
        for p in host.heap["delivered"]:
            h = p.header
            if spec.family in (Family.SSH_BUGGY, Family.SSH_CORRECT, Family.SSHB):
                if h.kind == SSH:
                    out.append(f"SSH packet {p.id} delivered to {host.name}")
            elif spec.family in (Family.MI, Family.MIB):
                trusted_port = spec.param("trusted_port", 1)
                if h.src in top.hosts and top.host_link(h.src).port != trusted_port:
                    if not policy.get(("trusted", h.src), False):
                        out.append(f"packet {p.id} from untrusted {h.src} delivered to {host.name}")
            elif spec.family == Family.LE:
                if not policy.get(("auth", h.src), False):
                    out.append(f"packet {p.id} from unauthenticated {h.src} delivered to {host.name}")
    return out


def table_inconsistencies(top: Topology, tables: dict[str, FlowTable]) -> list[str]:
    """Rules pointing at non-neighbours, and rule chains that revisit a switch."""
    out = []
    headers = set()
    for sw, ft in tables.items():
        for m, _, a in ft.entries():
            headers.add(m.header)
            if a.is_switch:
                port = top.port_towards(sw, a.target)
                if port is None or top.ports(sw)[port][2] != a.port:
                    out.append(f"{sw} forwards {m.header} to non-neighbour {a.target}:{a.port}")
            elif a.is_host:
                if a.target not in top.hosts or top.host_link(a.target).switch != sw:
                    out.append(f"{sw} delivers {m.header} to unattached host {a.target}")
    for h in sorted(headers):
        for sw in sorted(tables):
            for m in tables[sw].matches():
                if m.header != h:
                    continue
                path = [sw]
                here, port = sw, m.port
                while True:
                    a = lookup(tables.get(here, FlowTable()), MatchField(h, port))
                    if a is None or not a.is_switch:
                        break
                    here, port = a.target, a.port
                    if here in path:
                        out.append(f"rules for {h} cycle through {' -> '.join(path + [here])}")
                        break
                    path.append(here)
    return sorted(set(out))


def flowtable_consistency(cfg: Config) -> list[str]:
    top = _controller(cfg).heap["ntw"]
    tables = {a.name: a.heap["flowT"] for a in cfg.actors if a.kind == "Switch"}
    return table_inconsistencies(top, tables)


MONITORS: dict[str, PropertyMonitor] = {
    FORWARDING_LOOP: PropertyMonitor(FORWARDING_LOOP, "a packet reaches the same switch twice", True),
    CONTRADICTORY_RULES: PropertyMonitor(
        CONTRADICTORY_RULES, "drop and forward installed for one entry at one priority", True
    ),
    SAFETY_DELIVERY: PropertyMonitor(SAFETY_DELIVERY, "a delivery the policy forbids", False, safety_delivery),
    FLOWTABLE_CONSISTENCY: PropertyMonitor(
        FLOWTABLE_CONSISTENCY, "installed rules form a cycle or name a non-neighbour", False, flowtable_consistency
    ),
}


def monitor_flags(properties) -> dict[str, bool]:
    """Switch-heap flags needed by the requested in-step monitors."""
    props = set(properties)
    unknown = props - MONITORS.keys()
    if unknown:
        raise ValueError(f"unknown properties: {sorted(unknown)}")
    return {"detect_loops": FORWARDING_LOOP in props, "detect_conflicts": CONTRADICTORY_RULES in props}


def check_final(cfg: Config, properties) -> list[tuple[str, str]]:
    out = []
    for name in properties:
        mon = MONITORS[name]
        if mon.final is not None:
            out.extend((name, msg) for msg in mon.final(cfg))
    return out


def error_flag(cfg: Config) -> tuple:
    """Violations raised in-model during the execution that led to ``cfg``."""
    return cfg.errors
