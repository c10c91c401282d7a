"""Compare final states of the actor model with the network semantics."""

from sdnactors import scenario
from sdnactors.properties import monitor_flags
from sdnactors.semantics import crosscheck

for name in ("lb_buggy_1pkt", "ssh_buggy", "mi", "mib", "trivial"):
    sc = scenario.load(name)
    rep = crosscheck(sc.topology, sc.policy, sc.injections(), barriers=False, **monitor_flags(sc.properties))
    verdict = "MATCH" if rep.match else "MISMATCH"
    print(f"{name:14} {verdict:8} oracle={rep.oracle_finals} actor_classes={rep.actor_classes}")
