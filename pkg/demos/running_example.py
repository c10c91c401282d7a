"""Explore the buggy load balancer on the three-switch network, one packet.

Prints the execution count per independence level and where the packet
ended up in each distinct final state.
"""

from sdnactors import scenario
from sdnactors.dpor import Independence, explore
from sdnactors.encoding import delivered

sc = scenario.load("lb_buggy_1pkt")
for level in Independence:
    res = explore(sc.initial_config(), sc.options(independence=level, mode="full"))
    print(f"{level.value:8} execs={res.executions:3} states={res.states:3} loops={res.flagged['forwarding_loop']}")

res = explore(sc.initial_config(), sc.options(mode="full"))
for cfg in res.finals.values():
    where = [h for h, pkts in delivered(cfg).items() if pkts] or ["nowhere"]
    print("delivered to", ", ".join(where), "|", "; ".join(msg for _, msg in cfg.errors) or "no errors")
