"""Stable allocations with the centralized greedy solver.

The 3-cell / 5-channel instance has cells 1 and 2 interfering.  The greedy
max-first solver gives the unique stable allocation; a hand-made
alternative with a larger sum rate turns out to be unstable.
"""
import numpy as np

from smile_spectrum.matching import Allocation, enumerate_stable, is_stable, solve_stable
from smile_spectrum.topology import build_graph

means = np.array([[45, 10, 35, 25, 80], [30, 45, 20, 75, 90], [55, 5, 70, 15, 45]], dtype=float)
graph = build_graph(3, [(1, 2)], one_based=True)

alloc, log = solve_stable(means, graph)
print("greedy allocation:", alloc.as_dict(), "sum rate", alloc.value(means))
for k, it in enumerate(log, 1):
    print(f"  step {k}: cell {it.cell + 1} tries channel {it.channel + 1} ({it.value:g})",
          "-> assigned" if it.assigned else f"-> blocked by cell {it.blockers[0] + 1}")

print("all stable allocations:", [a.as_dict() for a in enumerate_stable(means, graph)])

greedy_rich = Allocation.from_dict({1: 5, 2: 4, 3: 3})
report = is_stable(greedy_rich, means, graph)
cell, channel = report.blocking
print(f"\n{greedy_rich.as_dict()} has sum rate {greedy_rich.value(means):g} but is not stable:")
print(f"  cell {cell + 1} prefers channel {channel + 1} and nobody stronger holds it")
