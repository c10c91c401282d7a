"""Macro-step semantics for actors with futures and conditional awaits.

A configuration is a set of actors, each with a private heap, plus every
task ever spawned (finished tasks stay so that awaits can observe them).
One macro-step picks an enabled task and runs it until it either returns
or reaches an ``await`` whose condition is false; an ``await`` whose
condition already holds is passed without giving up the actor.

Method bodies are plain Python state machines registered with
:func:`behavior`. A body receives a :class:`StepContext`, the call
arguments, its continuation label and a mutable dict of locals, and
returns ``None`` when finished or a :class:`Suspend` naming what it waits
for and where to resume.

Configurations are never mutated; every step builds a new one. Task ids
come from a counter stored in the configuration, so replaying the same
choices reproduces the same ids.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable

ENTRY = "entry"
FINISHED = "finished"
ALL = "*"


class RuntimeFault(RuntimeError):
    """Raised for choices that are not enabled or broken method protocols."""


@dataclass(frozen=True, order=True)
class Future:
    task: int


@dataclass(frozen=True)
class Wait:
    kind: str  # "future" or "cond"
    future: int = -1
    cond: str = ""
    args: tuple = ()

    @staticmethod
    def on(fut: Future) -> "Wait":
        return Wait("future", future=fut.task)

    @staticmethod
    def until(cond: str, *args: Any) -> "Wait":
        return Wait("cond", cond=cond, args=args)


@dataclass(frozen=True)
class Suspend:
    wait: Wait
    pc: str


@dataclass(frozen=True)
class Task:
    id: int
    actor: int
    method: str
    args: tuple = ()
    pc: str = ENTRY
    locals: tuple = ()
    wait: Wait | None = None

    @property
    def finished(self) -> bool:
        return self.pc == FINISHED


@dataclass(frozen=True)
class Actor:
    id: int
    kind: str
    name: str
    heap: dict = field(compare=False)
    active: int | None = None


@dataclass(frozen=True)
class Config:
    actors: tuple[Actor, ...] = ()
    tasks: dict = field(default_factory=dict, compare=False)
    next_task: int = 0
    errors: tuple = ()

    def actor(self, aid: int) -> Actor:
        return self.actors[aid]

    def queue(self, aid: int) -> list[Task]:
        return [t for t in self.tasks.values() if t.actor == aid]

    def by_name(self, name: str) -> Actor:
        for a in self.actors:
            if a.name == name:
                return a
        raise KeyError(name)

    def is_finished(self, tid: int) -> bool:
        t = self.tasks.get(tid)
        return t is not None and t.finished


Body = Callable[["StepContext", tuple, str, dict], "Suspend | None"]
BEHAVIORS: dict[str, Body] = {}
CONDITIONS: dict[str, tuple[Callable[..., bool], Callable[..., list]]] = {}


def behavior(name: str) -> Callable[[Body], Body]:
    def register(fn: Body) -> Body:
        BEHAVIORS[name] = fn
        return fn

    return register


def condition(name: str, reads: Callable[..., list]) -> Callable:
    """Register a heap predicate usable in ``await``; ``reads`` names the heap cells it inspects."""

    def register(fn: Callable[..., bool]) -> Callable[..., bool]:
        CONDITIONS[name] = (fn, reads)
        return fn

    return register


@dataclass(frozen=True)
class StepInfo:
    """What one macro-step did, as seen by the explorer and the monitors."""

    actor: int
    task: int
    method: str
    args: tuple
    start_pc: str
    end_pc: str
    accesses: tuple
    spawned: tuple
    resumed_future: int | None
    observed: tuple
    violations: tuple
    events: tuple
    blocked_on: int | None = None

    @property
    def finished(self) -> bool:
        return self.end_pc == FINISHED


class StepContext:
    def __init__(self, cfg: Config, task: Task):
        self.cfg = cfg
        self.task = task
        self.actor_id = task.actor
        self.heap = dict(cfg.actors[task.actor].heap)
        self.accesses: list[tuple] = []
        self.new_tasks: list[Task] = []
        self.new_actors: list[Actor] = []
        self.next_task = cfg.next_task
        self.violations: list[tuple] = []
        self.events: list[tuple] = []
        self.observed: list[int] = []

    # heap access, recorded for dependency analysis
    def const(self, name: str) -> Any:
        return self.heap[name]

    def read(self, name: str, key: Any = ALL) -> Any:
        self.accesses.append((name, key, "r"))
        return self.heap[name]

    def write(self, name: str, value: Any, key: Any = ALL) -> None:
        self.accesses.append((name, key, "w"))
        self.heap[name] = value

    def append(self, name: str, item: Any, key: Any = ALL) -> None:
        """Add to a multiset-valued field. Such additions commute with each other."""
        self.accesses.append((name, key, "a"))
        self.heap[name] = tuple(sorted(self.heap[name] + (item,), key=repr))

    def touch(self, name: str, key: Any, kind: str) -> None:
        self.accesses.append((name, key, kind))

    def spawn(self, target: int, method: str, *args: Any) -> Future:
        if method not in BEHAVIORS:
            raise RuntimeFault(f"unknown method {method}")
        if target >= len(self.cfg.actors) + len(self.new_actors):
            raise RuntimeFault(f"unknown actor {target}")
        tid = self.next_task
        self.next_task += 1
        self.new_tasks.append(Task(tid, target, method, tuple(args)))
        return Future(tid)

    def new_actor(self, kind: str, name: str, heap: dict) -> int:
        aid = len(self.cfg.actors) + len(self.new_actors)
        self.new_actors.append(Actor(aid, kind, name, dict(heap)))
        return aid

    def violation(self, prop: str, message: str) -> None:
        self.violations.append((prop, message))

    def event(self, *data: Any) -> None:
        self.events.append(tuple(data))

    def is_finished(self, fut: Future) -> bool:
        return self.cfg.is_finished(fut.task)

    def pending_on(self, aid: int, methods: Iterable[str]) -> list[int]:
        wanted = set(methods)
        tids = [t.id for t in self.cfg.tasks.values() if t.actor == aid and not t.finished and t.method in wanted]
        tids += [t.id for t in self.new_tasks if t.actor == aid and t.method in wanted]
        return sorted(tids)


def _cond_holds(wait: Wait, heap: dict) -> bool:
    fn, _ = CONDITIONS[wait.cond]
    return fn(heap, *wait.args)


def is_enabled(cfg: Config, task: Task) -> bool:
    if task.finished:
        return False
    w = task.wait
    if w is None:
        return True
    if w.kind == "future":
        return cfg.is_finished(w.future)
    return _cond_holds(w, cfg.actors[task.actor].heap)


def enabled_tasks(cfg: Config) -> list[tuple[int, int]]:
    """(actor, task) pairs that may take a macro-step, ascending."""
    return sorted((t.actor, t.id) for t in cfg.tasks.values() if is_enabled(cfg, t))


def execute(cfg: Config, choice: tuple[int, int]) -> tuple[Config, StepInfo]:
    """Run one macro-step and report its footprint."""
    aid, tid = choice
    task = cfg.tasks.get(tid)
    if task is None or task.actor != aid or not is_enabled(cfg, task):
        raise RuntimeFault(f"task {tid} on actor {aid} is not enabled")
    ctx = StepContext(cfg, task)
    resumed = None
    if task.wait is not None:
        if task.wait.kind == "future":
            resumed = task.wait.future
        else:
            for name, key in CONDITIONS[task.wait.cond][1](*task.wait.args):
                ctx.touch(name, key, "r")
    body = BEHAVIORS[task.method]
    pc = task.pc
    loc = dict(task.locals)
    while True:
        out = body(ctx, task.args, pc, loc)
        if out is None:
            pc, wait = FINISHED, None
            break
        w = out.wait
        if w.kind == "future":
            if cfg.is_finished(w.future):
                ctx.observed.append(w.future)
                pc = out.pc
                continue
            if any(t.id == w.future for t in ctx.new_tasks) or w.future in cfg.tasks:
                pc, wait = out.pc, w
                break
            raise RuntimeFault(f"await on unknown future {w.future}")
        for name, key in CONDITIONS[w.cond][1](*w.args):
            ctx.touch(name, key, "r")
        if _cond_holds(w, ctx.heap):
            pc = out.pc
            continue
        pc, wait = out.pc, w
        break
    new_task = replace(task, pc=pc, wait=wait, locals=tuple(sorted(loc.items())) if pc != FINISHED else ())
    tasks = dict(cfg.tasks)
    tasks[tid] = new_task
    for t in ctx.new_tasks:
        tasks[t.id] = t
    actors = list(cfg.actors)
    actors[aid] = replace(actors[aid], heap=ctx.heap, active=None)
    actors.extend(ctx.new_actors)
    errors = cfg.errors
    if ctx.violations:
        errors = tuple(sorted(errors + tuple(ctx.violations)))
    new_cfg = Config(tuple(actors), tasks, ctx.next_task, errors)
    info = StepInfo(
        actor=aid,
        task=tid,
        method=task.method,
        args=task.args,
        start_pc=task.pc,
        end_pc=pc,
        accesses=tuple(ctx.accesses),
        spawned=tuple(t.id for t in ctx.new_tasks),
        resumed_future=resumed,
        observed=tuple(ctx.observed),
        violations=tuple(ctx.violations),
        events=tuple(ctx.events),
        blocked_on=wait.future if wait is not None and wait.kind == "future" else None,
    )
    return new_cfg, info


def macro_step(cfg: Config, choice: tuple[int, int]) -> Config:
    return execute(cfg, choice)[0]


def is_complete(cfg: Config) -> bool:
    return all(t.finished for t in cfg.tasks.values())


def detect_deadlock(cfg: Config) -> bool:
    return not is_complete(cfg) and not enabled_tasks(cfg)


# fingerprints ---------------------------------------------------------------


def _digest(obj: Any) -> str:
    return hashlib.sha256(repr(obj).encode()).hexdigest()


# Renderings of objects that mention no futures do not depend on the rest
# of the configuration, so they are cached by identity. Tasks and untouched
# heaps are shared between successive configurations, which makes this pay.
_STABLE: dict[int, tuple[Any, str]] = {}
_STABLE_LIMIT = 400_000


def _remember(obj: Any, digest: str) -> None:
    if len(_STABLE) >= _STABLE_LIMIT:
        _STABLE.clear()
    _STABLE[id(obj)] = (obj, digest)


def _recall(obj: Any) -> str | None:
    hit = _STABLE.get(id(obj))
    return hit[1] if hit is not None and hit[0] is obj else None


class _Canon:
    """Renders a configuration with task ids replaced by structural labels."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.labels: dict[int, str] = {}
        self.busy: set[int] = set()
        self.saw_future = False

    def label(self, tid: int) -> str:
        if tid in self.labels:
            return self.labels[tid]
        if tid in self.busy or tid not in self.cfg.tasks:
            return "cycle" if tid in self.busy else "missing"
        t = self.cfg.tasks[tid]
        lab = _recall(t)
        if lab is None:
            self.busy.add(tid)
            outer, self.saw_future = self.saw_future, False
            wait = None
            if t.wait is not None:
                if t.wait.kind == "future":
                    self.saw_future = True
                    wait = ("fut", self.label(t.wait.future))
                else:
                    wait = (t.wait.cond, self.value(t.wait.args))
            body = (t.actor, t.method, self.value(t.args), t.pc, self.value(t.locals), wait)
            self.busy.discard(tid)
            lab = _digest(body)[:24]
            if not self.saw_future:
                _remember(t, lab)
            self.saw_future = outer or self.saw_future
        self.labels[tid] = lab
        return lab

    def heap(self, heap: dict) -> str:
        d = _recall(heap)
        if d is None:
            outer, self.saw_future = self.saw_future, False
            d = _digest(self.value(heap))
            if not self.saw_future:
                _remember(heap, d)
            self.saw_future = outer or self.saw_future
        return d

    def value(self, v: Any) -> Any:
        if isinstance(v, Future):
            self.saw_future = True
            return ("fut", self.label(v.task))
        if isinstance(v, dict):
            return tuple(sorted(((self.value(k), self.value(x)) for k, x in v.items()), key=repr))
        if isinstance(v, (set, frozenset)):
            return ("set",) + tuple(sorted((self.value(x) for x in v), key=repr))
        if isinstance(v, (list, tuple)):
            return tuple(self.value(x) for x in v)
        return v


def canonical_form(cfg: Config) -> tuple:
    c = _Canon(cfg)
    actors = tuple((a.kind, a.name, c.heap(a.heap)) for a in cfg.actors)
    tasks = tuple(sorted(c.label(t) for t in cfg.tasks))
    return actors, tasks, cfg.errors


def canonical_fingerprint(cfg: Config) -> str:
    """Digest stable under queue order and consistent task-id renaming."""
    return _digest(canonical_form(cfg))


def rename_tasks(cfg: Config, shift: int) -> Config:
    """Copy of ``cfg`` with every task id moved by ``shift`` (for testing)."""

    def mv(v: Any) -> Any:
        if isinstance(v, Future):
            return Future(v.task + shift)
        if isinstance(v, dict):
            return {k: mv(x) for k, x in v.items()}
        if isinstance(v, frozenset):
            return frozenset(mv(x) for x in v)
        if isinstance(v, tuple):
            return tuple(mv(x) for x in v)
        if isinstance(v, list):
            return [mv(x) for x in v]
        return v

    tasks = {}
    for t in cfg.tasks.values():
        wait = t.wait
        if wait is not None and wait.kind == "future":
            wait = replace(wait, future=wait.future + shift)
        tasks[t.id + shift] = replace(t, id=t.id + shift, args=mv(t.args), locals=mv(t.locals), wait=wait)
    actors = tuple(replace(a, heap=mv(a.heap)) for a in cfg.actors)
    return Config(actors, tasks, cfg.next_task + shift, cfg.errors)
