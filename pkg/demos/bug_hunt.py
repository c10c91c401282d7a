"""Stop at the first property violation and print its trace.

Usage: python3 demos/bug_hunt.py [scenario]   (default ssh_buggy)
"""

import sys

from sdnactors import scenario
from sdnactors.dpor import explore

sc = scenario.load(sys.argv[1] if len(sys.argv) > 1 else "ssh_buggy")
full = explore(sc.initial_config(), sc.options(mode="full"))
res = explore(sc.initial_config(), sc.options(mode="property"))
print(f"{sc.name}: property mode visited {res.states} states, full mode {full.states}")
for v in res.violations:
    print(f"\n{v.property}: {v.message}")
    for ev in v.trace:
        print(ev.line())
