"""
Mapping a signed matrix onto memristor pairs and solving one module.

Each signed entry is stored as the difference of two conductances in
[0.1, 30] uS. With b-bit devices every conductance is rounded to one of
2**b evenly spaced levels, which perturbs the solved estimate.
"""

import numpy as np

from memsic.crossbar import decode_output, encode_inputs, map_matrix, program_stage, solve_module
from memsic.sic import mmse_stage, realify_matrix, realify_vector

rng = np.random.default_rng(4)

# %% a small hand-checkable example
O = np.array([[1.0, -2.0], [0.0, 2.0]])
mm = map_matrix(O)
print(f"beta = {mm.beta * 1e6:.2f} uS per unit")
print("U (uS):\n", mm.U * 1e6)
print("V (uS):\n", np.round(mm.V * 1e6, 3))

# %% one stage-1 module for a 4-user, 8-antenna channel
K, R, sigma2 = 4, 8, 0.1
H = (rng.standard_normal((R, K)) + 1j * rng.standard_normal((R, K))) / np.sqrt(2)
y = H @ (rng.choice([-1, 1], K) + 1j * rng.choice([-1, 1], K)) / np.sqrt(2)
ref = mmse_stage(H, y, sigma2)
for bits in (None, 8, 6, 4):
    prog = program_stage(1, realify_matrix(H), None, sigma2, bits=bits)
    v_in1, v_in2 = encode_inputs(realify_vector(y), np.zeros(0), prog)
    r = decode_output(solve_module(prog, v_in1, v_in2), prog.c)
    err = np.linalg.norm(r - ref) / np.linalg.norm(ref)
    print(f"bits={str(bits):>4}: lambda1={prog.lam1 * 1e6:6.3f} uS, relative error {err:.2e}")
