"""Stateless exploration of actor configurations with partial-order reduction.

The explorer is source-DPOR with sleep sets over macro-steps. Processes are
tasks; an event is one macro-step of one task. Happens-before is built from
program order, task creation, future resolution and dependency between
events. Which events count as dependent is selected by
:class:`Independence`:

NAIVE     any two steps of the same actor
ACTOR     same actor and a read/write clash on some heap field
ENTRY     same actor and a clash on the same table entry
CONTEXT   ENTRY, minus pairs shown to commute in the current state

Steps of different actors are always independent except where one of them
parks on, or passes through, an await on a future that the other step
completes.
"""

from __future__ import annotations

import random
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from . import barriers as _barriers  # noqa: F401  (registers the barrier condition)
from . import encoding as _encoding
from .barriers import barrier_invariant_monitor
from .network import lookup
from .properties import check_final
from .runtime import (
    ALL,
    Config,
    RuntimeFault,
    StepInfo,
    canonical_fingerprint,
    enabled_tasks,
    execute,
)


class Mode(str, Enum):
    FULL = "full"
    PROPERTY = "property"


class Independence(str, Enum):
    NAIVE = "naive"
    ACTOR = "actor"
    ENTRY = "entry"
    CONTEXT = "context"


class InstanceTooLarge(RuntimeError):
    pass


class ReplayError(RuntimeFault):
    pass


@dataclass(frozen=True)
class ExplorationOptions:
    mode: Mode = Mode.FULL
    independence: Independence = Independence.ACTOR
    max_depth: int = 1000
    packet_bound: int = 1000
    properties: tuple = ()
    debug: bool = False
    sample_rate: float = 1.0
    seed: int = 0
    parallel: int = 1
    max_violations: int = 50
    time_limit: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "independence", Independence(self.independence))
        object.__setattr__(self, "properties", tuple(self.properties))
        if self.max_depth <= 0:
            raise ValueError("max_depth must be positive")
        if self.packet_bound < 1:
            raise ValueError("packet_bound must be at least 1")


@dataclass(frozen=True)
class TraceEvent:
    step: int
    actor: int
    actor_name: str
    task: int
    method: str
    args: tuple
    spawns: tuple
    heap_delta: tuple
    violations: tuple

    def line(self) -> str:
        args = ", ".join(map(str, self.args))
        out = f"{self.step:3d} {self.actor_name}[{self.actor}] t{self.task} {self.method}({args})"
        if self.spawns:
            out += " spawns " + ", ".join(f"t{t}:{m}@{a}" for t, a, m in self.spawns)
        if self.violations:
            out += " VIOLATION " + "; ".join(f"{p}: {m}" for p, m in self.violations)
        return out


@dataclass
class Violation:
    property: str
    message: str
    choices: list
    trace: list


@dataclass
class ExplorationResult:
    executions: int = 0
    states: int = 0
    deadlocks: int = 0
    depth_exhausted: int = 0
    sleep_blocked: int = 0
    violations: list = field(default_factory=list)
    final_fingerprints: set = field(default_factory=set)
    bounded_fingerprints: set = field(default_factory=set)
    finals: dict = field(default_factory=dict)
    flagged: Counter = field(default_factory=Counter)
    barrier_violations: list = field(default_factory=list)
    commutation_checks: int = 0
    commutation_failures: list = field(default_factory=list)
    elapsed: float = 0.0
    stopped_early: bool = False
    timed_out: bool = False

    def merge(self, other: "ExplorationResult") -> None:
        self.executions += other.executions
        self.states += other.states
        self.deadlocks += other.deadlocks
        self.depth_exhausted += other.depth_exhausted
        self.sleep_blocked += other.sleep_blocked
        self.violations.extend(other.violations)
        self.final_fingerprints |= other.final_fingerprints
        self.bounded_fingerprints |= other.bounded_fingerprints
        for fp, cfg in other.finals.items():
            self.finals.setdefault(fp, cfg)
        self.flagged.update(other.flagged)
        self.barrier_violations.extend(other.barrier_violations)
        self.commutation_checks += other.commutation_checks
        self.commutation_failures.extend(other.commutation_failures)
        self.stopped_early = self.stopped_early or other.stopped_early
        self.timed_out = self.timed_out or other.timed_out


# dependency -----------------------------------------------------------------


def _future_linked(a: StepInfo, b: StepInfo) -> bool:
    # Passing an await only because the future is already resolved depends on
    # the step that resolved it: the other order parks the task and lets its
    # actor run something else. Parking and then being resumed is not a race,
    # since resolving first just fuses the two halves into one step.
    return (b.finished and b.task in a.observed) or (a.finished and a.task in b.observed)


def _parks_on(a: StepInfo, b: StepInfo) -> bool:
    # One step parks on the future the other resolves. Not a race, but the two
    # orders end in different states, so a sleeping task must wake up here:
    # otherwise nothing can run between the park and the resume.
    return (a.blocked_on == b.task and b.finished) or (b.blocked_on == a.task and a.finished)


def _install_is_neutral(pre: Config, install: StepInfo) -> bool:
    m, prio, action = install.args
    ft = pre.actors[install.actor].heap["flowT"]
    entries = ft.entries_for(m)
    if not entries:
        return False
    best = max(p for p, _ in entries)
    return prio < best or (prio == best and action == lookup(ft, m))


def _commute_in_context(a: StepInfo, b: StepInfo, fld: str, pre: Config | None) -> bool:
    if fld != "flowT" or pre is None:
        return False
    installs = [s for s in (a, b) if s.method == _encoding.INSTALL]
    if len(installs) == 2:
        return a.args == b.args
    if len(installs) == 1:
        other = b if installs[0] is a else a
        if any(f == "flowT" and k != "r" for f, _, k in other.accesses):
            return False
        return _install_is_neutral(pre, installs[0])
    return False


def events_dependent(a: StepInfo, b: StepInfo, level: Independence, pre: Config | None = None) -> bool:
    """Whether two macro-steps may fail to commute.

    ``pre`` is the configuration before the earlier of the two; only the
    CONTEXT level looks at it.
    """
    if _future_linked(a, b):
        return True
    if a.actor != b.actor:
        return False
    if a.task == b.task or level == Independence.NAIVE:
        return True
    for f1, k1, t1 in a.accesses:
        for f2, k2, t2 in b.accesses:
            if f1 != f2 or (t1 == "r" and t2 == "r"):
                continue
            if level == Independence.ACTOR:
                return True
            if t1 == "a" and t2 == "a":
                continue
            if k1 != k2 and k1 != ALL and k2 != ALL:
                continue
            if level == Independence.CONTEXT and _commute_in_context(a, b, f1, pre):
                continue
            return True
    return False


def dependent(t1: tuple[int, int], t2: tuple[int, int], cfg: Config, level: Independence | str) -> bool:
    """Dependency between the next macro-steps of two pending tasks in ``cfg``."""
    level = Independence(level)
    (a1, id1), (a2, id2) = t1, t2
    if a1 == a2 and level == Independence.NAIVE:
        return True
    i1 = execute(cfg, t1)[1]
    i2 = execute(cfg, t2)[1]
    return events_dependent(i1, i2, level, cfg)


# trace reporting --------------------------------------------------------------


def trace_event(step: int, before: Config, after: Config, info: StepInfo) -> TraceEvent:
    old = before.actors[info.actor].heap
    new = after.actors[info.actor].heap
    delta = tuple((k, repr(new[k])) for k in sorted(new) if k not in old or old[k] is not new[k] and old[k] != new[k])
    spawns = tuple((t, after.tasks[t].actor, after.tasks[t].method) for t in info.spawned)
    return TraceEvent(
        step, info.actor, before.actors[info.actor].name, info.task, info.method, info.args, spawns, delta, info.violations
    )


def replay(cfg0: Config, choices: Iterable[tuple[int, int]]) -> Config:
    cfg = cfg0
    for i, choice in enumerate(choices):
        try:
            cfg, _ = execute(cfg, tuple(choice))
        except RuntimeFault as exc:
            raise ReplayError(f"invalid choice at step {i}: {choice} ({exc})") from exc
    return cfg


def replay_trace(cfg0: Config, choices: Sequence[tuple[int, int]]) -> list[TraceEvent]:
    cfg = cfg0
    out = []
    for i, choice in enumerate(choices):
        try:
            nxt, info = execute(cfg, tuple(choice))
        except RuntimeFault as exc:
            raise ReplayError(f"invalid choice at step {i}: {choice} ({exc})") from exc
        out.append(trace_event(i, cfg, nxt, info))
        cfg = nxt
    return out


def _check_packet_bound(cfg: Config, k: int) -> None:
    per_header = Counter(t.args[0].header for t in cfg.tasks.values() if t.method == _encoding.SEND_IN)
    for header, n in per_header.items():
        if n > k:
            raise ValueError(f"{n} packets with header {header} exceed the bound k={k}")


# explorer ---------------------------------------------------------------------


class _Frame:
    __slots__ = ("cfg", "enabled", "steps", "backtrack", "done", "sleep")

    def __init__(self, cfg: Config, sleep: set):
        self.cfg = cfg
        self.enabled = {tid: aid for aid, tid in enabled_tasks(cfg)}
        self.steps: dict[int, tuple[Config, StepInfo]] = {}
        self.backtrack: set[int] = set()
        self.done: set[int] = set()
        self.sleep = sleep

    def step(self, tid: int) -> tuple[Config, StepInfo]:
        if tid not in self.steps:
            self.steps[tid] = execute(self.cfg, (self.enabled[tid], tid))
        return self.steps[tid]

    def order(self, tids: Iterable[int]) -> list[int]:
        return sorted(tids, key=lambda t: (self.enabled[t], t))


class _Stop(Exception):
    pass


class Explorer:
    def __init__(self, cfg0: Config, opts: ExplorationOptions):
        self.cfg0 = cfg0
        self.opts = opts
        self.level = opts.independence
        self.result = ExplorationResult()
        self.frames: list[_Frame] = []
        self.events: list[StepInfo] = []
        self.hb: list[int] = []  # bitmask of events that happen before each event
        self.rng = random.Random(opts.seed)
        self.watch_barriers = bool(cfg0.actors and cfg0.actors[0].heap.get("barriers"))

    # happens-before and race detection
    def _attach(self, info: StepInfo) -> None:
        n = len(self.events)
        structural: list[int] = []
        deps: list[int] = []
        own_seen = False
        for i in range(n - 1, -1, -1):
            e = self.events[i]
            if e.task == info.task:
                if not own_seen:
                    structural.append(i)
                    own_seen = True
                continue
            if info.task in e.spawned:
                structural.append(i)
                continue
            if info.resumed_future is not None and e.task == info.resumed_future and e.finished:
                structural.append(i)
                continue
            if (e.actor == info.actor or e.observed or info.observed) and events_dependent(
                e, info, self.level, self.frames[i].cfg
            ):
                deps.append(i)
        preds = structural + deps
        closure = [self.hb[d] | (1 << d) for d in preds]
        mask = 0
        for c in closure:
            mask |= c
        for j, i in enumerate(deps):
            idx = len(structural) + j
            covered = any((closure[k] >> i) & 1 for k in range(len(preds)) if k != idx)
            if not covered:
                self._add_backtrack(i, info, mask)
        self.hb.append(mask)

    def _add_backtrack(self, i: int, info: StepInfo, new_mask: int) -> None:
        n = len(self.events)
        frame = self.frames[i]
        v = [k for k in range(i + 1, n) if not (self.hb[k] >> i) & 1]
        in_v = 0
        initials: list[int] = []
        for k in v:
            if not self.hb[k] & in_v:
                initials.append(self.events[k].task)
            in_v |= 1 << k
        if not new_mask & in_v:
            initials.append(info.task)
        cands = [t for t in dict.fromkeys(initials) if t in frame.enabled]
        if not cands or any(t in frame.backtrack for t in cands):
            return
        awake = [t for t in cands if t not in frame.sleep]
        if awake:
            frame.backtrack.add(frame.order(awake)[0])

    # leaves
    def _leaf(self, cfg: Config, kind: str) -> None:
        r = self.result
        r.executions += 1
        fp = canonical_fingerprint(cfg)
        if kind == "bound":
            r.depth_exhausted += 1
            r.bounded_fingerprints.add(fp)
        else:
            if kind == "deadlock":
                r.deadlocks += 1
            r.final_fingerprints.add(fp)
        r.finals.setdefault(fp, cfg)
        flagged = {p for p, _ in cfg.errors}
        finals = check_final(cfg, self.opts.properties)
        flagged |= {p for p, _ in finals}
        r.flagged.update(flagged)
        if self.watch_barriers:
            evs = [ev for e in self.events for ev in e.events]
            for bv in barrier_invariant_monitor(evs):
                r.barrier_violations.append((bv, self._choices()))
        for prop, msg in finals:
            self._violation(prop, msg)

    def _choices(self) -> list[tuple[int, int]]:
        return [(e.actor, e.task) for e in self.events]

    def _violation(self, prop: str, msg: str) -> None:
        r = self.result
        if len(r.violations) < self.opts.max_violations:
            choices = self._choices()
            r.violations.append(Violation(prop, msg, choices, replay_trace(self.cfg0, choices)))
        if self.opts.mode == Mode.PROPERTY:
            r.stopped_early = True
            raise _Stop

    # debug: sampled commutation checks
    def _sample_commutation(self, fr: _Frame) -> None:
        tids = fr.order(fr.enabled)
        for x in range(len(tids)):
            for y in range(x + 1, len(tids)):
                if self.opts.sample_rate < 1.0 and self.rng.random() >= self.opts.sample_rate:
                    continue
                p, q = tids[x], tids[y]
                cp, ip = fr.step(p)
                cq, iq = fr.step(q)
                if events_dependent(ip, iq, self.level, fr.cfg):
                    continue
                self.result.commutation_checks += 1
                try:
                    a = execute(cp, (fr.enabled[q], q))[0]
                    b = execute(cq, (fr.enabled[p], p))[0]
                    # a task parked on the other's future is compared once resumed
                    if ip.blocked_on == q:
                        a = execute(a, (fr.enabled[p], p))[0]
                    if iq.blocked_on == p:
                        b = execute(b, (fr.enabled[q], q))[0]
                    ok = canonical_fingerprint(a) == canonical_fingerprint(b)
                except RuntimeFault:
                    ok = False
                if not ok:
                    self.result.commutation_failures.append((self._choices(), (fr.enabled[p], p), (fr.enabled[q], q)))

    def _explore(self, root_only: int | None = None) -> None:
        fr = self.frames[-1]
        depth = len(self.events)
        if not fr.enabled:
            self._leaf(fr.cfg, "complete" if all(t.finished for t in fr.cfg.tasks.values()) else "deadlock")
            return
        if depth >= self.opts.max_depth:
            self._leaf(fr.cfg, "bound")
            return
        if self.deadline is not None and time.perf_counter() > self.deadline:
            self.result.timed_out = self.result.stopped_early = True
            raise _Stop
        if self.opts.debug:
            self._sample_commutation(fr)
        awake = [t for t in fr.order(fr.enabled) if t not in fr.sleep]
        if not awake:
            self.result.sleep_blocked += 1
            return
        if root_only is None:
            fr.backtrack.add(awake[0])
        else:
            fr.backtrack.add(root_only)
        while True:
            todo = [t for t in fr.order(fr.backtrack) if t not in fr.sleep and t not in fr.done]
            if root_only is not None:
                todo = [t for t in todo if t == root_only]
            if not todo:
                return
            p = todo[0]
            fr.done.add(p)
            nxt, info = fr.step(p)
            child_sleep = set()
            for q in fr.sleep:
                iq = fr.step(q)[1]
                if not (events_dependent(iq, info, self.level, fr.cfg) or _parks_on(iq, info)):
                    child_sleep.add(q)
            self._attach(info)
            self.events.append(info)
            self.frames.append(_Frame(nxt, child_sleep))
            self.result.states += 1
            try:
                for prop, msg in info.violations:
                    self._violation(prop, msg)
                self._explore()
            finally:
                self.frames.pop()
                self.events.pop()
                self.hb.pop()
            fr.sleep.add(p)

    def run(self, root_only: int | None = None, root_sleep: Iterable[int] = (), known_root: Iterable[int] = ()) -> ExplorationResult:
        _check_packet_bound(self.cfg0, self.opts.packet_bound)
        start = time.perf_counter()
        self.deadline = None if self.opts.time_limit is None else start + self.opts.time_limit
        root = _Frame(self.cfg0, set(root_sleep))
        root.backtrack |= set(known_root) & set(root.enabled)
        root.done |= set(root_sleep)
        self.frames = [root]
        if root_only is None:
            self.result.states += 1
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * self.opts.max_depth + 1000))
        try:
            self._explore(root_only)
        except _Stop:
            pass
        finally:
            sys.setrecursionlimit(limit)
        self.root_backtrack = set(root.backtrack)
        self.result.elapsed = time.perf_counter() - start
        return self.result


def _run_branch(cfg0: Config, opts: ExplorationOptions, choice: int, sleep: tuple, known: tuple):
    ex = Explorer(cfg0, opts)
    res = ex.run(root_only=choice, root_sleep=sleep, known_root=known)
    res.finals = {}  # configurations stay in the worker; fingerprints are enough
    return res, sorted(ex.root_backtrack - set(known))


def _explore_parallel(cfg0: Config, opts: ExplorationOptions) -> ExplorationResult:
    start = time.perf_counter()
    total = ExplorationResult(states=1)
    root = _Frame(cfg0, set())
    if not root.enabled:
        return Explorer(cfg0, opts).run()
    known = [root.order(root.enabled)[0]]
    explored: list[int] = []
    wave = list(known)
    with ProcessPoolExecutor(max_workers=opts.parallel) as pool:
        while wave:
            futs = [
                pool.submit(_run_branch, cfg0, opts, p, tuple(explored + wave[:k]), tuple(known))
                for k, p in enumerate(wave)
            ]
            additions: set[int] = set()
            for fut in futs:
                res, added = fut.result()
                total.merge(res)
                additions |= set(added)
            explored += wave
            if opts.mode == Mode.PROPERTY and total.violations:
                total.violations = total.violations[:1]
                break
            wave = root.order(additions - set(known))
            known += wave
    total.elapsed = time.perf_counter() - start
    return total


def explore(cfg0: Config, opts: ExplorationOptions | None = None) -> ExplorationResult:
    """Explore one representative per equivalence class of executions."""
    opts = opts or ExplorationOptions()
    if opts.parallel > 1:
        return _explore_parallel(cfg0, opts)
    return Explorer(cfg0, opts).run()


# exhaustive enumeration (oracle for the explorer) ----------------------------


@dataclass(frozen=True)
class _Subtree:
    executions: int
    states: int
    deadlocks: int
    bounded: int
    height: int
    finals: frozenset
    bounded_finals: frozenset


def enumerate_all(cfg0: Config, opts: ExplorationOptions | None = None, max_states: int = 200_000) -> ExplorationResult:
    """Counts and final states of the full interleaving tree.

    Subtrees are shared between configurations with equal fingerprints, so
    counts are those of the unreduced tree without walking it node by node.
    """
    opts = opts or ExplorationOptions()
    _check_packet_bound(cfg0, opts.packet_bound)
    start = time.perf_counter()
    memo: dict[str, _Subtree] = {}
    # subtrees cut by the depth bound depend on the depth they start at
    memo_at: dict[tuple[str, int], _Subtree] = {}
    finals: dict[str, Config] = {}

    def visit(cfg: Config, depth: int) -> _Subtree:
        fp = canonical_fingerprint(cfg)
        hit = memo.get(fp)
        if hit is not None and depth + hit.height <= opts.max_depth:
            return hit
        hit = memo_at.get((fp, depth))
        if hit is not None:
            return hit
        choices = enabled_tasks(cfg)
        if not choices:
            finals.setdefault(fp, cfg)
            dead = int(not all(t.finished for t in cfg.tasks.values()))
            sub = _Subtree(1, 1, dead, 0, 0, frozenset([fp]), frozenset())
        elif depth >= opts.max_depth:
            finals.setdefault(fp, cfg)
            sub = _Subtree(1, 1, 0, 1, 0, frozenset(), frozenset([fp]))
        else:
            if len(memo) + len(memo_at) >= max_states:
                raise InstanceTooLarge(f"more than {max_states} distinct states")
            parts = [visit(execute(cfg, c)[0], depth + 1) for c in choices]
            sub = _Subtree(
                sum(p.executions for p in parts),
                1 + sum(p.states for p in parts),
                sum(p.deadlocks for p in parts),
                sum(p.bounded for p in parts),
                1 + max(p.height for p in parts),
                frozenset().union(*(p.finals for p in parts)),
                frozenset().union(*(p.bounded_finals for p in parts)),
            )
        if sub.bounded == 0:
            memo[fp] = sub
        else:
            memo_at[(fp, depth)] = sub
        return sub

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * opts.max_depth + 1000))
    try:
        top = visit(cfg0, 0)
    finally:
        sys.setrecursionlimit(limit)
    res = ExplorationResult(
        executions=top.executions,
        states=top.states,
        deadlocks=top.deadlocks,
        depth_exhausted=top.bounded,
        final_fingerprints=set(top.finals),
        bounded_fingerprints=set(top.bounded_finals),
    )
    res.finals = {fp: finals[fp] for fp in top.finals | top.bounded_finals}
    for fp in top.finals:
        res.flagged.update({p for p, _ in finals[fp].errors})
    res.elapsed = time.perf_counter() - start
    return res
