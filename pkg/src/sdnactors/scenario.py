"""Scenario files: topology, controller, injected traffic, exploration settings.

A scenario is a JSON document::

    {
      "name": "lb_buggy_1pkt",
      "description": "free text",
      "topology": {"sh_links": [["S1", "H0", 0]], "ss_links": [["S1", 1, "S2", 1]]},
      "controller": {"family": "LB", "params": {"vip": "VIP", "replicas": ["R1", "R2"]},
                     "barriers": false},
      "injections": [{"host": "H0", "header": {"src": "H0", "dst": "VIP", "kind": "OTHER"},
                      "count": 1}],
      "exploration": {"mode": "full", "independence": "actor", "max_depth": 1000,
                      "packet_bound": 1},
      "properties": ["forwarding_loop"]
    }

``barriers`` may be omitted, in which case the family decides (LBB, SSHB
and LE use the barrier controller). ``count`` expands to that many packets
with consecutive ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .dpor import ExplorationOptions, Independence, Mode
from .encoding import Injection, build_initial_config, make_injections
from .network import OTHER, PacketHeader, Topology, topology
from .policies import Family, PolicySpec
from .properties import MONITORS, monitor_flags
from .runtime import Config

SCHEMA: dict = {
    "type": "object",
    "required": ["topology", "controller"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "topology": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sh_links": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [{"type": "string"}, {"type": "string"}, {"type": "integer", "minimum": 0}],
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
                "ss_links": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [
                            {"type": "string"},
                            {"type": "integer", "minimum": 0},
                            {"type": "string"},
                            {"type": "integer", "minimum": 0},
                        ],
                        "minItems": 4,
                        "maxItems": 4,
                    },
                },
            },
        },
        "controller": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": [f.value for f in Family]},
                "params": {"type": "object"},
                "barriers": {"type": ["boolean", "null"]},
                "faulty_barriers": {"type": "boolean"},
            },
        },
        "injections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["host", "header"],
                "additionalProperties": False,
                "properties": {
                    "host": {"type": "string"},
                    "header": {
                        "type": "object",
                        "required": ["src", "dst"],
                        "additionalProperties": False,
                        "properties": {"src": {"type": "string"}, "dst": {"type": "string"}, "kind": {"type": "string"}},
                    },
                    "count": {"type": "integer", "minimum": 1},
                },
            },
        },
        "exploration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": [m.value for m in Mode]},
                "independence": {"enum": [i.value for i in Independence]},
                "max_depth": {"type": "integer", "minimum": 1},
                "packet_bound": {"type": "integer", "minimum": 1},
            },
        },
        "properties": {"type": "array", "items": {"enum": sorted(MONITORS)}},
    },
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Traffic:
    host: str
    header: PacketHeader
    count: int = 1


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    policy: PolicySpec
    barriers: bool | None = None
    faulty_barriers: bool = False
    traffic: tuple[Traffic, ...] = ()
    mode: Mode = Mode.FULL
    independence: Independence = Independence.ACTOR
    max_depth: int = 1000
    packet_bound: int = 1000
    properties: tuple[str, ...] = ()
    name: str = ""
    description: str = field(default="", compare=False)

    # parsing
    @staticmethod
    def from_dict(doc: dict) -> "Scenario":
        try:
            jsonschema.validate(doc, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(map(str, exc.absolute_path)) or "<root>"
            raise ScenarioError(f"{where}: {exc.message}") from None
        topo = doc["topology"]
        top = topology([tuple(l) for l in topo.get("sh_links", [])], [tuple(l) for l in topo.get("ss_links", [])])
        ctrl = doc["controller"]
        spec = PolicySpec.of(ctrl["family"], **ctrl.get("params", {}))
        traffic = tuple(
            Traffic(
                i["host"],
                PacketHeader(i["header"]["src"], i["header"]["dst"], i["header"].get("kind", OTHER)),
                i.get("count", 1),
            )
            for i in doc.get("injections", [])
        )
        ex = doc.get("exploration", {})
        sc = Scenario(
            topology=top,
            policy=spec,
            barriers=ctrl.get("barriers"),
            faulty_barriers=ctrl.get("faulty_barriers", False),
            traffic=traffic,
            mode=Mode(ex.get("mode", "full")),
            independence=Independence(ex.get("independence", "actor")),
            max_depth=ex.get("max_depth", 1000),
            packet_bound=ex.get("packet_bound", 1000),
            properties=tuple(doc.get("properties", [])),
            name=doc.get("name", ""),
            description=doc.get("description", ""),
        )
        sc.validate()
        return sc

    def validate(self) -> None:
        hosts = set(self.topology.hosts)
        for t in self.traffic:
            if t.host not in hosts:
                raise ScenarioError(f"injection at unknown host {t.host}")
        per_header: dict[PacketHeader, int] = {}
        for t in self.traffic:
            per_header[t.header] = per_header.get(t.header, 0) + t.count
        for h, n in per_header.items():
            if n > self.packet_bound:
                raise ScenarioError(f"{n} packets of type {h} exceed packet_bound {self.packet_bound}")

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {}
        if self.name:
            doc["name"] = self.name
        if self.description:
            doc["description"] = self.description
        doc["topology"] = {
            "sh_links": [[l.switch, l.host, l.port] for l in self.topology.sh_links],
            "ss_links": [[l.s1, l.p1, l.s2, l.p2] for l in self.topology.ss_links],
        }
        ctrl: dict[str, Any] = {"family": self.policy.family.value, "params": self.policy.params_dict()}
        if self.barriers is not None:
            ctrl["barriers"] = self.barriers
        if self.faulty_barriers:
            ctrl["faulty_barriers"] = True
        doc["controller"] = ctrl
        doc["injections"] = [
            {"host": t.host, "header": {"src": t.header.src, "dst": t.header.dst, "kind": t.header.kind}, "count": t.count}
            for t in self.traffic
        ]
        doc["exploration"] = {
            "mode": self.mode.value,
            "independence": self.independence.value,
            "max_depth": self.max_depth,
            "packet_bound": self.packet_bound,
        }
        doc["properties"] = list(self.properties)
        return doc

    # derived objects
    @property
    def uses_barriers(self) -> bool:
        return self.policy.family.uses_barriers if self.barriers is None else self.barriers

    def injections(self) -> list[Injection]:
        return make_injections((t.host, t.header, t.count) for t in self.traffic)

    def initial_config(self) -> Config:
        return build_initial_config(
            self.topology,
            self.policy,
            self.injections(),
            barriers=self.uses_barriers,
            faulty_barriers=self.faulty_barriers,
            **monitor_flags(self.properties),
        )

    def options(self, **overrides: Any) -> ExplorationOptions:
        base = dict(
            mode=self.mode,
            independence=self.independence,
            max_depth=self.max_depth,
            packet_bound=self.packet_bound,
            properties=self.properties,
        )
        base.update({k: v for k, v in overrides.items() if v is not None})
        return ExplorationOptions(**base)

    def with_(self, **changes: Any) -> "Scenario":
        return replace(self, **changes)


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    return Scenario.from_dict(doc)


def dumps(sc: Scenario) -> str:
    return json.dumps(sc.to_dict(), indent=2) + "\n"


def bundled_names() -> list[str]:
    root = resources.files("sdnactors") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load(ref: str | Path) -> Scenario:
    """Load a scenario from a path, or by the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return loads(path.read_text())
    name = str(ref)
    if name.endswith(".json"):
        name = name[:-5]
    if name in bundled_names():
        return loads((resources.files("sdnactors") / "scenarios" / f"{name}.json").read_text())
    raise ScenarioError(f"no scenario file or bundled scenario named {ref}")
