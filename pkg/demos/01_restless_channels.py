"""Restless Markov channels.

Builds the six-state Rayleigh chain rescaled to a mean of 45, looks at its
stationary law and hitting times, and checks that a long trajectory spends
the right fraction of slots in each state.  Then does the same for a
Gilbert-Elliott good/bad channel.
"""
import numpy as np

from smile_spectrum.channel import (
    ChainBank,
    ChannelMatrix,
    build_gilbert_elliott,
    mean_hitting_times,
    paper_rayleigh6,
)

model = paper_rayleigh6(45.0)
print("rates per state:", np.round(model.states, 2))
print("stationary law: ", np.round(model.stationary, 4))
print("mean rate:      ", model.mean_rate)

M, M_max = mean_hitting_times(model)
print("slots to reach the top state from the bottom one:", round(M[0, 5], 2))
print("largest mean hitting time:", round(M_max, 2))

# every chain moves every slot, whether anybody listens or not
bank = ChainBank(ChannelMatrix.from_grid([[model]]), np.random.default_rng(0))
states, rates = bank.advance(200_000)
occupancy = np.bincount(states[:, 0, 0], minlength=6) / len(states)
print("empirical occupancy:", np.round(occupancy, 4))
print("empirical mean rate:", round(rates.mean(), 3))

ge = build_gilbert_elliott(p_stay_good=0.9, p_stay_bad=0.8, good_rate=30.0)
print("\nGilbert-Elliott: P =", ge.transition.tolist(), "pi =", np.round(ge.stationary, 4), "mean =", ge.mean_rate)
