"""One distributed allocation phase on the five-cell example.

Each cell only knows its own estimates.  Bids go out in rate order; a bid
on a channel held by a neighbor costs an extra slot and both sides remember
the encounter.  Seven iterations, two of them collisions, nine slots.
"""
import numpy as np

from smile_spectrum.agent import Agent, AgentParams
from smile_spectrum.engine import run_allocation_protocol
from smile_spectrum.matching import solve_stable
from smile_spectrum.topology import build_graph, check_feasibility

estimates = np.array([[60, 40, 50], [30, 20, 75], [58, 55, 80], [10, 15, 90], [35, 70, 25]], dtype=float)
graph = build_graph(5, [(1, 2), (1, 3), (1, 4), (3, 4)], one_based=True)
print("degrees:", graph.degrees.tolist())
check_feasibility(graph, 3)  # warns: cell 1 has three neighbors but only three channels exist

agents = [Agent(c, 3, graph.neighbors[c], AgentParams(kappa=1.0, sampling_constant=1.0)) for c in range(5)]
for a in agents:
    a.estimates[:] = estimates[a.cell_id]

result = run_allocation_protocol(agents, graph)
for k, it in enumerate(result.iterations, 1):
    what = "assigned" if it.assigned else "collision with cell " + ", ".join(str(q + 1) for q in it.blockers)
    print(f"iteration {k}: cell {it.cell + 1} on channel {it.channel + 1}: {what}")
print("slots used:", result.slots)
print("allocation:", result.allocation.as_dict())
print("same as the centralized solver:", result.allocation == solve_stable(estimates, graph)[0])

print("\nwhat cell 3 learned about channel 3:", {q + 1: r for q, r in agents[2].registry[2].items()})
print("what cell 4 learned about channel 3:", {q + 1: r for q, r in agents[3].registry[2].items()})
