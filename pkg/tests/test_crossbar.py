import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memsic.crossbar import (
    DEFAULT_RANGE,
    ConductanceRange,
    decode_output,
    dump_program,
    encode_inputs,
    map_matrix,
    operating_point,
    program_stage,
    quantization_levels,
    quantize_conductance,
    solve_module,
    split_feedback,
)
from memsic.errors import (
    CalibrationError,
    ConfigurationError,
    ContractViolation,
    DegenerateMatrixError,
    SingularSystemError,
)
from memsic.sic import mmse_stage, realify_matrix, realify_vector

from conftest import random_channel

uS = 1e-6


def kirchhoff_solve(prog, v_in1, v_in2):
    """Both node equations as one block system in (v1, v2)."""
    m, n = prog.n_inputs, prog.n_outputs
    drive = prog.lam0 * np.asarray(v_in1)
    if prog.n_head:
        drive = drive - prog.D1 @ v_in2
    A = np.block([[prog.lam1 * np.eye(m), prog.D2],
                  [prog.D3.T, -prog.lam2 * np.eye(n)]])
    x = np.linalg.solve(A, np.concatenate([-drive, np.zeros(n)]))
    return x[:m], x[m:]


class TestMapping:
    def test_hand_example(self):
        O = np.array([[1.0, -2.0], [0.0, 2.0]])
        mm = map_matrix(O)
        assert mm.beta == pytest.approx(14.95 * uS)
        np.testing.assert_allclose(mm.U, np.array([[30, 0.1], [0.1, 30]]) * uS)
        np.testing.assert_allclose(mm.V, np.array([[15.05, 30], [0.1, 0.1]]) * uS, rtol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(r=st.integers(1, 12), c=st.integers(1, 12), seed=st.integers(0, 2**32 - 1),
           scale=st.floats(1e-3, 1e3))
    def test_difference_and_range(self, r, c, seed, scale):
        O = scale * np.random.default_rng(seed).standard_normal((r, c))
        mm = map_matrix(O)
        np.testing.assert_allclose(mm.U - mm.V, mm.beta * O, atol=1e-12 * DEFAULT_RANGE.alpha_max)
        assert DEFAULT_RANGE.contains(mm.U) and DEFAULT_RANGE.contains(mm.V)

    def test_smaller_beta_allowed(self):
        O = np.array([[0.5, -1.0]])
        mm = map_matrix(O, beta=1e-6)
        np.testing.assert_allclose(mm.U - mm.V, 1e-6 * O)
        with pytest.raises(ContractViolation):
            map_matrix(O, beta=1.0)

    def test_stack_maps_each_matrix(self, rng):
        O = rng.standard_normal((5, 3, 4))
        mm = map_matrix(O)
        for i in range(5):
            single = map_matrix(O[i])
            assert mm.beta[i] == pytest.approx(single.beta)
            np.testing.assert_allclose(mm.V[i], single.V)

    def test_degenerate(self):
        with pytest.raises(DegenerateMatrixError):
            map_matrix(np.zeros((2, 2)))
        with pytest.raises(ContractViolation):
            map_matrix(np.array([[np.nan]]))


class TestQuantization:
    def test_levels_include_ends(self):
        lv = quantization_levels(3)
        assert lv.size == 8 and lv[0] == DEFAULT_RANGE.alpha_min and lv[-1] == DEFAULT_RANGE.alpha_max

    @settings(max_examples=60, deadline=None)
    @given(bits=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
    def test_half_step_and_on_grid(self, bits, seed):
        g = np.random.default_rng(seed).uniform(DEFAULT_RANGE.alpha_min, DEFAULT_RANGE.alpha_max, 200)
        q = quantize_conductance(g, bits)
        step = DEFAULT_RANGE.span / (2 ** bits - 1)
        assert np.all(np.abs(q - g) <= step / 2 * (1 + 1e-9))
        lv = quantization_levels(bits)
        assert np.all(np.min(np.abs(q[:, None] - lv[None, :]), axis=1) <= 1e-9 * step)

    def test_endpoints_exact(self):
        for b in range(1, 10):
            q = quantize_conductance(np.array([DEFAULT_RANGE.alpha_min, DEFAULT_RANGE.alpha_max]), b)
            np.testing.assert_array_equal(q, [DEFAULT_RANGE.alpha_min, DEFAULT_RANGE.alpha_max])

    def test_infinite_precision_is_identity(self):
        g = np.array([1e-6, 2.345e-6])
        np.testing.assert_array_equal(quantize_conductance(g, None), g)
        np.testing.assert_array_equal(quantize_conductance(g, np.inf), g)

    def test_errors(self):
        with pytest.raises(ContractViolation):
            quantize_conductance(40e-6, 4)
        with pytest.raises(ConfigurationError):
            quantize_conductance(1e-6, 0)

    def test_range_validation(self):
        with pytest.raises(ConfigurationError):
            ConductanceRange(30e-6, 0.1e-6)


class TestFeedback:
    def test_split(self):
        a, b = split_feedback(25e-12)
        assert a == pytest.approx(5e-6) and b == pytest.approx(5e-6)

    def test_out_of_range(self):
        with pytest.raises(CalibrationError):
            split_feedback(1e-16)
        with pytest.raises(CalibrationError):
            split_feedback(1e-9)


def _random_program(rng, K=None, R=None, bits=None):
    K = K or int(rng.integers(1, 6))
    R = R or K + int(rng.integers(1, 6))
    k = int(rng.integers(1, K + 1))
    G = random_channel(rng, R, K)
    sigma2 = float(rng.uniform(1e-3, 1.0))
    head = realify_matrix(G[:, :k - 1]) if k > 1 else None
    prog = program_stage(k, realify_matrix(G[:, k - 1:]), head, sigma2, bits=bits)
    return prog, G, k, sigma2


class TestModule:
    def test_operating_point_satisfies_node_equations(self, rng):
        for _ in range(50):
            prog, *_ = _random_program(rng, bits=int(rng.integers(3, 9)))
            v_in1 = rng.uniform(-0.1, 0.1, prog.n_inputs)
            v_in2 = rng.uniform(-0.1, 0.1, prog.n_head)
            op = operating_point(prog, v_in1, v_in2)
            v1_ref, v2_ref = kirchhoff_solve(prog, v_in1, v_in2)
            np.testing.assert_allclose(op.v1, v1_ref, rtol=1e-9, atol=1e-15)
            np.testing.assert_allclose(op.v2, v2_ref, rtol=1e-9, atol=1e-15)

    def test_decoded_output_is_mmse_estimate(self, rng):
        for _ in range(50):
            prog, G, k, sigma2 = _random_program(rng)
            s = rng.choice([-1, 1], G.shape[1]) + 1j * rng.choice([-1, 1], G.shape[1])
            y = G @ s + 0.1 * random_channel(rng, G.shape[0], 1)[:, 0]
            e_head = realify_vector(s[:k - 1]) if k > 1 else np.zeros(0)
            v_in1, v_in2 = encode_inputs(realify_vector(y), e_head, prog)
            r = decode_output(solve_module(prog, v_in1, v_in2), prog.c)
            ref = mmse_stage(G[:, k - 1:], y - G[:, :k - 1] @ s[:k - 1], sigma2)
            np.testing.assert_allclose(r, ref, rtol=1e-9, atol=1e-9 * np.max(np.abs(ref)))

    def test_program_in_range(self, rng):
        for _ in range(30):
            prog, *_ = _random_program(rng, bits=5)
            for name, arr in prog.arrays().items():
                assert DEFAULT_RANGE.contains(arr), name
            for lam in (prog.lam0, prog.lam1, prog.lam2):
                assert DEFAULT_RANGE.contains(lam)

    def test_large_noise_lowers_mapping_scale(self, rng):
        G = realify_matrix(random_channel(rng, 4, 2))
        prog = program_stage(1, G, None, 4.0)
        assert prog.lam1 * prog.lam2 == pytest.approx(prog.beta_g ** 2 * 4.0)
        assert prog.lam1 <= DEFAULT_RANGE.alpha_max * (1 + 1e-12)

    def test_zero_noise_removes_feedback(self, rng):
        prog = program_stage(1, realify_matrix(random_channel(rng, 4, 2)), None, 0.0)
        assert prog.lam1 == prog.lam2 == 0.0
        with pytest.raises(SingularSystemError):
            operating_point(prog, np.zeros(prog.n_inputs))

    def test_contracts(self, rng):
        prog, *_ = _random_program(rng, K=3, R=5)
        with pytest.raises(ContractViolation):
            solve_module(prog, np.zeros(prog.n_inputs + 1), np.zeros(prog.n_head))
        with pytest.raises(ContractViolation):
            program_stage(1, np.eye(2), np.eye(2), 0.1)
        with pytest.raises(ContractViolation):
            decode_output(np.ones(2), 0.0)

    def test_input_ceiling_warns(self, rng):
        prog = program_stage(1, realify_matrix(random_channel(rng, 4, 2)), None, 0.1)
        encode_inputs(np.full(8, 100.0), np.zeros(0), prog, v_max=0.5)
        assert prog.warnings and "exceeds" in prog.warnings[0]

    def test_dump(self, rng, tmp_path):
        prog, *_ = _random_program(rng, K=3, R=5)
        path = tmp_path / "prog.json"
        dump_program(prog, path)
        doc = json.loads(path.read_text())
        assert doc["stage"] == prog.stage
        assert doc["lambda0"] == pytest.approx(prog.lam0, rel=1e-11)
        np.testing.assert_allclose(doc["C2"], prog.C2, rtol=1e-11)
