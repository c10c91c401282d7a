"""Same traffic, barrier controller: a single execution, packet reaches R1.

Then the faulty variant, which opens a second barrier without waiting,
and the monitor's complaints about it.
"""

from sdnactors import scenario
from sdnactors.dpor import explore
from sdnactors.encoding import delivered

sc = scenario.load("lbb_1pkt")
res = explore(sc.initial_config(), sc.options())
(final,) = res.finals.values()
print("execs", res.executions, "delivered to R1:", [p.id for p in delivered(final)["R1"]])

bad = scenario.load("lbb_faulty_2pkt")
res = explore(bad.initial_config(), bad.options())
for v in sorted({bv for bv, _ in res.barrier_violations}, key=str):
    print(f"{v.rule:8} {v.switch}: {v.detail}")
