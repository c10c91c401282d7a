"""Barrier-aware controller and the runtime check of the barrier invariant.

The controller keeps two tables on its heap: ``barrierMap`` maps a switch
to the futures of messages sent to it since its last barrier, and
``barrierOn`` is the set of switches currently inside a barrier. Before
sending anything to a switch the controller waits until that switch is
out of its barrier. After installing all rules it raises a barrier on
every switch it touched, waits for the outstanding futures, and only then
releases the buffered packet.

Emitted trace events (consumed by :func:`barrier_invariant_monitor`):

``("barrier_on", sid, pending)``   switch-message tasks on ``sid`` not yet finished
``("barrier_off", sid, unfinished)``  the same set when the barrier is lifted
``("spawn", actor, method, tid)``  every message the controller sends
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .runtime import Future, StepContext, Suspend, Wait, condition

SWITCH_METHODS = ("switchHandleMessage", "sendOut", "flood")


@condition("barrier_free", reads=lambda sid: [("barrierOn", sid)])
def barrier_free(heap: dict, sid: str) -> bool:
    return sid not in heap["barrierOn"]


def _send(ctx: StepContext, sid: str, method: str, *args) -> Future:
    aid = ctx.const("srefs")[sid]
    fut = ctx.spawn(aid, method, *args)
    ctx.event("spawn", sid, method, fut.task)
    bm = ctx.read("barrierMap", sid)
    ctx.write("barrierMap", {**bm, sid: bm.get(sid, ()) + (fut,)}, sid)
    return fut


def _wait_free(sid: str, pc: str) -> Suspend:
    return Suspend(Wait.until("barrier_free", sid), pc)


def barrier_control(ctx: StepContext, args: tuple, pc: str, loc: dict):
    """Controller body with barriers, written as a resumable state machine."""
    from .encoding import decide

    sid, o, pid, ph = args
    while True:
        if pc == "entry":
            rules, flood = decide(ctx, sid, o, ph)
            loc["todo"] = tuple(rules)
            loc["touched"] = ()
            loc["flood"] = flood
            pc = "install"
        elif pc == "install":
            if not loc["todo"]:
                pc = "request"
                continue
            return _wait_free(loc["todo"][0].switch, "install_go")
        elif pc == "install_go":
            d, loc["todo"] = loc["todo"][0], loc["todo"][1:]
            _send(ctx, d.switch, "switchHandleMessage", d.match, d.priority, d.action)
            loc["touched"] = loc["touched"] + (d.switch,)
            pc = "install"
        elif pc == "request":
            if not loc["touched"]:
                pc = "final"
                continue
            if ctx.const("faulty_barriers"):
                pc = "request_go"
                continue
            return _wait_free(loc["touched"][0], "request_go")
        elif pc == "request_go":
            s = loc["touched"][0]
            on = ctx.read("barrierOn", s)
            ctx.write("barrierOn", on | {s}, s)
            bm = ctx.read("barrierMap", s)
            loc["futs"] = bm.get(s, ())
            ctx.write("barrierMap", {k: v for k, v in bm.items() if k != s}, s)
            ctx.event("barrier_on", s, tuple(ctx.pending_on(ctx.const("srefs")[s], SWITCH_METHODS)))
            pc = "await"
        elif pc == "await":
            if loc["futs"]:
                return Suspend(Wait.on(loc["futs"][0]), "await_next")
            s = loc["touched"][0]
            on = ctx.read("barrierOn", s)
            ctx.write("barrierOn", on - {s}, s)
            ctx.event("barrier_off", s, tuple(ctx.pending_on(ctx.const("srefs")[s], SWITCH_METHODS)))
            loc["touched"] = loc["touched"][1:]
            pc = "request"
        elif pc == "await_next":
            loc["futs"] = loc["futs"][1:]
            pc = "await"
        elif pc == "final":
            return _wait_free(sid, "final_go")
        elif pc == "final_go":
            _send(ctx, sid, "flood" if loc["flood"] else "sendOut", pid, o)
            return None
        else:  # pragma: no cover
            raise ValueError(pc)


@dataclass(frozen=True)
class BarrierViolation:
    rule: str
    switch: str
    detail: str


def barrier_invariant_monitor(events: Iterable[tuple]) -> list[BarrierViolation]:
    """Check one execution's event sequence against the barrier guarantees.

    1. Messages pending on a switch when its barrier is raised have all
       been processed by the time the barrier is lifted.
    2. No message is sent to a switch while its barrier is up.
    3. A barrier is never raised on a switch that is already inside one.
    """
    out: list[BarrierViolation] = []
    active: dict[str, tuple[int, ...]] = {}
    for ev in events:
        tag = ev[0]
        if tag == "barrier_on":
            _, sid, pending = ev
            if sid in active:
                out.append(BarrierViolation("nested", sid, "barrier raised twice"))
            active[sid] = tuple(pending)
        elif tag == "barrier_off":
            _, sid, unfinished = ev
            left = sorted(set(active.pop(sid, ())) & set(unfinished))
            if left:
                out.append(BarrierViolation("pending", sid, f"tasks {left} still queued"))
        elif tag == "spawn":
            _, sid, method, tid = ev
            if sid in active:
                out.append(BarrierViolation("during", sid, f"{method} task {tid} sent inside barrier"))
    return out
