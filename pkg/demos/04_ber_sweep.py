"""
BER against SNR for several memristor precisions (8 users, 16 antennas).

A short run; the detector needs about 6 bits before its curve sits on top
of the digital one. Pass an output directory as the first argument to also
write the CSV files and an SVG plot.
"""

import sys

from memsic.harness import ExperimentConfig, ber_sweep

cfg = ExperimentConfig(snr_db=(8.0, 12.0, 16.0), precisions=(3, 4, 6, 8, "digital"),
                       trials=2000, out=sys.argv[1] if len(sys.argv) > 1 else None,
                       plot=len(sys.argv) > 1)
records = ber_sweep(cfg)

precisions = list(dict.fromkeys(r.precision for r in records))
print("snr_db " + " ".join(f"{p:>9}" for p in precisions))
for snr in cfg.snr_db:
    row = {r.precision: r.ber for r in records if r.snr_db == snr}
    print(f"{snr:6.1f} " + " ".join(f"{row[p]:9.2e}" for p in precisions))
