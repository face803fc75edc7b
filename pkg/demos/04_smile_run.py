"""A single SMILE replication on the 3x5 instance.

Prints how the slots were spent, the allocations the cells agreed on over
time, and the windowed sum rate next to the oracle value of 205.
"""
import numpy as np

from smile_spectrum.experiment import load_config
from smile_spectrum.engine import EngineConfig, run

cfg = load_config("paper_3x5")
inst = cfg.instance
res = run(EngineConfig(inst.channels, inst.graph, 100_000, cfg.agent_params(), seed=3))

counts = res.phase_counts()
total = sum(counts.values())
print("share of cell-slots per phase:")
for name, n in sorted(counts.items(), key=lambda kv: -kv[1]):
    print(f"  {name:<10} {100 * n / total:6.2f}%")

print(f"\n{len(res.allocations)} allocation phases; the first few and the last:")
for ev in res.allocations[:4] + res.allocations[-1:]:
    print(f"  slot {ev.start:>6}: {ev.allocation.as_dict()} in {ev.slots} slots")

for lo, hi in [(1, 1_000), (1_000, 10_000), (10_000, 50_000), (50_000, 100_000)]:
    print(f"mean sum rate over slots {lo}..{hi}: {res.sum_rate[lo - 1:hi].mean():7.2f}")

print("\nfinal estimates (rows are cells):")
print(np.round([a.estimates for a in res.agents], 1))
print("true means:")
print(np.round(inst.means, 1))
