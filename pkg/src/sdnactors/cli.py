"""Command-line front end.

    sdnactors SCENARIO [--mode full|property] [--independence LEVEL] [--max-depth N]
                       [--barriers on|off] [--trace-out PATH] [--parallel N] [--crosscheck]

``SCENARIO`` is a path or the name of a bundled scenario (``--list`` shows
them). The report is JSON on stdout. Exit status: 0 no violation, 1
violation found (or crosscheck mismatch), 2 error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import fields, is_dataclass
from typing import Any, Sequence

from .dpor import ExplorationResult, InstanceTooLarge, explore
from .network import FlowTable, Packet, TopologyError
from .properties import monitor_flags
from .runtime import Config, Future, RuntimeFault
from .scenario import Scenario, ScenarioError, bundled_names, load
from .semantics import NotComparable, crosscheck

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2

# heap entries fixed at construction; the report shows only what can change
STATIC_FIELDS = frozenset(
    {
        "srefs", "hrefs", "ntw", "spec", "barriers", "faulty_barriers",
        "sid", "ctrl", "refs", "ports", "detect_loops", "detect_conflicts",
        "name", "switch", "port",
    }
)  # fmt: skip


def render(v: Any) -> Any:
    """JSON-ready, deterministic rendering of heap values."""
    if isinstance(v, FlowTable):
        return [f"{m.header}@{m.port} prio {prio} -> {a}" for m, prio, a in v.entries()]
    if isinstance(v, Packet):
        return f"p{v.id} {v.header}"
    if isinstance(v, Future):
        return f"future t{v.task}"
    if isinstance(v, dict):
        items = sorted(((json.dumps(render(k)), render(x)) for k, x in v.items()))
        return {k.strip('"'): x for k, x in items}
    if isinstance(v, (set, frozenset)):
        return sorted((render(x) for x in v), key=json.dumps)
    if isinstance(v, (list, tuple)):
        return [render(x) for x in v]
    if is_dataclass(v) and not isinstance(v, type):
        return {f.name: render(getattr(v, f.name)) for f in fields(v)}
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    return str(v)


def final_state_summary(fp: str, cfg: Config) -> dict:
    return {
        "fingerprint": fp[:16],
        "errors": [f"{p}: {m}" for p, m in cfg.errors],
        "actors": [
            {
                "id": a.id,
                "kind": a.kind,
                "name": a.name,
                "fields": {k: render(v) for k, v in sorted(a.heap.items()) if k not in STATIC_FIELDS},
            }
            for a in cfg.actors
        ],
    }


def run_report(sc: Scenario, res: ExplorationResult, opts, max_finals: int) -> dict:
    fps = sorted(res.final_fingerprints | res.bounded_fingerprints)
    return {
        "command": "run",
        "scenario": sc.name,
        "options": {
            "mode": opts.mode.value,
            "independence": opts.independence.value,
            "max_depth": opts.max_depth,
            "barriers": sc.uses_barriers,
            "properties": list(opts.properties),
        },
        "result": {
            "execs": res.executions,
            "states": res.states,
            "deadlocks": res.deadlocks,
            "depth_exhausted": res.depth_exhausted,
            "distinct_final_states": len(res.final_fingerprints),
            "stopped_early": res.stopped_early,
            "timed_out": res.timed_out,
            "elapsed_s": round(res.elapsed, 3),
        },
        "flagged": dict(sorted(res.flagged.items())),
        "violations": [
            {"property": v.property, "message": v.message, "trace": [e.line() for e in v.trace]} for v in res.violations
        ],
        "barrier_violations": [
            {"rule": bv.rule, "switch": bv.switch, "detail": bv.detail, "choices": [list(c) for c in ch]}
            for bv, ch in res.barrier_violations
        ],
        "final_states_shown": min(len(fps), max_finals),
        "final_states": [final_state_summary(fp, res.finals[fp]) for fp in fps[:max_finals] if fp in res.finals],
    }


def write_traces(path: str, res: ExplorationResult) -> None:
    with open(path, "w") as fh:
        for i, v in enumerate(res.violations):
            for e in v.trace:
                fh.write(
                    json.dumps(
                        {
                            "violation": i,
                            "property": v.property,
                            "step": e.step,
                            "actor": e.actor,
                            "actor_name": e.actor_name,
                            "task": e.task,
                            "method": e.method,
                            "args": render(e.args),
                            "spawns": render(e.spawns),
                            "heap_delta": render(e.heap_delta),
                            "violations": render(e.violations),
                        }
                    )
                    + "\n"
                )


def crosscheck_report(sc: Scenario, max_states: int) -> tuple[dict, int]:
    if sc.uses_barriers:
        return {
            "command": "crosscheck",
            "scenario": sc.name,
            "status": "rejected",
            "reason": "the barrier controller has no counterpart in the network semantics; "
            "crosscheck covers barrier-free scenarios only",
        }, EXIT_ERROR
    start = time.perf_counter()
    rep = crosscheck(
        sc.topology, sc.policy, sc.injections(), barriers=False, max_states=max_states, **monitor_flags(sc.properties)
    )
    return {
        "command": "crosscheck",
        "scenario": sc.name,
        "status": "MATCH" if rep.match else "MISMATCH",
        "oracle_finals": rep.oracle_finals,
        "actor_finals": rep.actor_finals,
        "actor_classes": rep.actor_classes,
        "matched": rep.matched,
        "oracle_bound_hits": rep.oracle_bound_hits,
        "actor_bound_hits": rep.actor_bound_hits,
        "unmatched_oracle": [render(s) for s in rep.unmatched_oracle],
        "unmatched_actor": [final_state_summary("", c) for c in rep.unmatched_actor],
        "elapsed_s": round(time.perf_counter() - start, 3),
    }, (EXIT_OK if rep.match else EXIT_VIOLATION)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdnactors", description="Explore SDN controller scenarios with partial-order reduction.")
    p.add_argument("scenario", nargs="?", help="scenario file, or name of a bundled scenario")
    p.add_argument("--list", action="store_true", help="list bundled scenarios and exit")
    p.add_argument("--mode", choices=["full", "property"])
    p.add_argument("--independence", choices=["naive", "actor", "entry", "context"])
    p.add_argument("--max-depth", type=int)
    p.add_argument("--barriers", choices=["on", "off"], help="override the scenario's controller choice")
    p.add_argument("--trace-out", metavar="PATH", help="write violating traces as JSON lines")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    p.add_argument("--crosscheck", action="store_true", help="compare against the network semantics instead")
    p.add_argument("--max-finals", type=int, default=50, help="final states listed in the report")
    p.add_argument("--max-states", type=int, default=200_000, help="size guard for --crosscheck")
    p.add_argument("--time-limit", type=float, help="stop exploring after this many seconds")
    p.add_argument("--debug", action="store_true", help="sample commutation of independent pairs")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        print("\n".join(bundled_names()))
        return EXIT_OK
    if not args.scenario:
        print("error: a scenario is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        sc = load(args.scenario)
        if args.barriers is not None:
            sc = sc.with_(barriers=args.barriers == "on")
        if args.crosscheck:
            report, code = crosscheck_report(sc, args.max_states)
        else:
            opts = sc.options(
                mode=args.mode,
                independence=args.independence,
                max_depth=args.max_depth,
                parallel=args.parallel,
                time_limit=args.time_limit,
                debug=args.debug or None,
            )
            res = explore(sc.initial_config(), opts)
            report = run_report(sc, res, opts, args.max_finals)
            if args.debug:
                report["commutation"] = {
                    "checks": res.commutation_checks,
                    "failures": len(res.commutation_failures),
                }
            if args.trace_out:
                write_traces(args.trace_out, res)
            found = bool(res.violations or res.barrier_violations)
            report["status"] = "violation" if found else "ok"
            code = EXIT_VIOLATION if found else EXIT_OK
    except (ScenarioError, TopologyError, RuntimeFault, InstanceTooLarge, NotComparable, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(report, indent=2))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
