"""
Slicer walk-through: 16-QAM levels, thresholds, and the two select structures.

The comparator bank produces a thermometer word. The directly-select
structure feeds it to an 8-channel multiplexer as is, while the
indirectly-select structure first compresses it to two bits and needs only
four channels. Both must give the same output for every input.
"""

import numpy as np

from memsic import build_constellation
from memsic.slicer import SlicerConfig, comparator_bank, mux_channels, slicer_eval, truth_table

const = build_constellation(16, v0=0.1)
direct = SlicerConfig.from_constellation(const, "direct")
indirect = SlicerConfig.from_constellation(const, "indirect")

print("levels (V):     ", np.round(direct.s_value, 5))
print("thresholds (V): ", np.round(direct.s_threshold, 5))

# %% the truth table, one row per cell of the threshold partition
for cfg in (direct, indirect):
    print(f"\n{cfg.structure.value} select, {cfg.mux_channel_count} channels")
    for row in truth_table(cfg):
        print(f"  {row.interval:8s} p={row.p} q={row.q or '-'} -> channel {row.channel + 1}: {row.level}")
    print("  wiring:", np.round(mux_channels(cfg), 4))

# %% a few voltages, including one sitting exactly on a threshold
v = np.array([-0.2, -0.04, 0.0, 0.015, 0.2])
print("\nv_sin  :", v)
print("p      :", comparator_bank(v, direct.s_threshold).tolist())
print("direct :", np.round(slicer_eval(v, direct), 5))
print("indirect", np.round(slicer_eval(v, indirect), 5))
