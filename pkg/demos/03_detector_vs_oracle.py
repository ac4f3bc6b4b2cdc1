"""
The full analog detector against the digital MMSE-SIC reference.

With unquantized conductances the two agree to rounding error. Finite
precision moves the stage outputs, and now and then a decision.
"""

import numpy as np

from memsic import build_constellation, build_detector, detect, generate_channel, sic_detect, transmit
from memsic.mimo import MimoConfig, modulate_bits, noise_var_from_snr_db, random_bits

cfg = MimoConfig(8, 16)
const = build_constellation(16)
sigma2 = noise_var_from_snr_db(12.0, cfg.K)
rng = np.random.default_rng(11)

chan = generate_channel(cfg, rng)
s = modulate_bits(random_bits(cfg.K * const.bits_per_symbol, rng), const)
y = transmit(chan, s, sigma2, rng).y

s_ref, ref = sic_detect(chan.F, y, sigma2, const)
print("detection order:", list(ref.order))
for bits in (None, 8, 6, 4):
    s_hat, tr = detect(build_detector(chan, sigma2, const, bits=bits), y)
    dev = max(np.max(np.abs(a - b)) for a, b in zip(tr.r, ref.r))
    print(f"bits={str(bits):>4}: max |r_k - r_k(digital)| = {dev:.2e}, "
          f"decisions differing from digital: {int(np.sum(s_hat != s_ref))}, "
          f"symbol errors: {int(np.sum(~np.isclose(s_hat, s)))}")

# %% the stage-by-stage voltages of the 6-bit detector
_, tr = detect(build_detector(chan, sigma2, const, bits=6), y)
for k, v in enumerate(tr.voltages, start=1):
    print(f"stage {k}: v_sin = ({v.v_sin[0]:+.4f}, {v.v_sin[1]:+.4f}) V -> "
          f"v_sout = ({v.v_sout[0]:+.4f}, {v.v_sout[1]:+.4f}) V")
