"""
Timing, speed, energy and the processor comparison for 32 users, 64 antennas.
"""

from memsic.perf import (
    TIMING_LT1016_ADG1608,
    comparison_table,
    convergence_time,
    default_report,
    format_comparison,
)

report = default_report()
print(report.to_text())

# %% slower off-the-shelf comparator and multiplexer
print(f"\nwith 10 ns comparators and 150 ns multiplexers: "
      f"{convergence_time(32, TIMING_LT1016_ADG1608) * 1e6:.2f} us")

# %% against the digital processors
print()
print(format_comparison(comparison_table([report])))
