import numpy as np
import pytest

from memsic.detector import build_detector, detect, detect_batch
from memsic.errors import ContractViolation
from memsic.mimo import ChannelRealization, build_constellation
from memsic.sic import sic_detect

from conftest import random_channel


def instance(rng, K, R, order=16, sigma2=0.1):
    c = build_constellation(order)
    F = random_channel(rng, R, K)
    s = c.points[rng.integers(0, order, K)]
    y = F @ s + np.sqrt(sigma2) * random_channel(rng, R, 1)[:, 0]
    return c, F, s, y


class TestAgainstOracle:
    @pytest.mark.parametrize("K", [1, 2, 4, 8])
    def test_unquantized_matches_digital(self, rng, K):
        for _ in range(20):
            sigma2 = float(rng.uniform(1e-3, 1.0))
            c, F, s, y = instance(rng, K, 2 * K, sigma2=sigma2)
            s_hat, tr = detect(build_detector(F, sigma2, c), y)
            s_ref, ref = sic_detect(F, y, sigma2, c)
            np.testing.assert_array_equal(s_hat, s_ref)
            for r, r_ref in zip(tr.r, ref.r):
                assert np.max(np.abs(r - r_ref)) <= 1e-9 * np.max(np.abs(r_ref))

    def test_zero_forcing_limit(self, rng):
        c, F, s, _ = instance(rng, 4, 8)
        s_hat, tr = detect(build_detector(F, 0.0, c), F @ s)
        np.testing.assert_allclose(s_hat, s, atol=1e-12)
        _, ref = sic_detect(F, F @ s, 0.0, c)
        np.testing.assert_allclose(tr.r[0], ref.r[0], rtol=1e-9, atol=1e-12)

    def test_noise_free_recovery_quantized(self, rng):
        c = build_constellation(4)
        F = random_channel(rng, 8, 4)
        for _ in range(20):
            s = c.points[rng.integers(0, 4, 4)]
            s_hat, _ = detect(build_detector(F, 0.01, c, bits=8), F @ s)
            np.testing.assert_allclose(s_hat, s, atol=1e-12)


class TestStructures:
    def test_direct_and_indirect_agree(self, rng):
        for _ in range(20):
            c, F, s, y = instance(rng, 4, 8, order=64, sigma2=0.2)
            a, ta = detect(build_detector(F, 0.2, c, bits=6, structure="direct"), y)
            b, tb = detect(build_detector(F, 0.2, c, bits=6, structure="indirect"), y)
            np.testing.assert_array_equal(a, b)
            assert [v.v_sout for v in ta.voltages] == [v.v_sout for v in tb.voltages]


class TestTrace:
    def test_stage_voltages(self, rng):
        c, F, s, y = instance(rng, 4, 8)
        det = build_detector(ChannelRealization.from_effective(F), 0.1, c, bits=6)
        s_hat, tr = detect(det, y)
        assert [v.v_out.size for v in tr.voltages] == [8, 6, 4, 2]
        for k, (r, v, e) in enumerate(zip(tr.r, tr.voltages, tr.estimates)):
            n = r.size // 2
            assert v.v_sin == (pytest.approx(det.c * r[0]), pytest.approx(det.c * r[n]))
            assert v.v_sout == (pytest.approx(det.c * e.real), pytest.approx(det.c * e.imag))
            assert v.v_in2.size == 2 * k
        np.testing.assert_array_equal(s_hat[det.order.as_array()], tr.e)

    def test_length_check(self, rng):
        c, F, _, _ = instance(rng, 2, 4)
        with pytest.raises(ContractViolation):
            detect(build_detector(F, 0.1, c), np.zeros(5))


class TestBatch:
    def test_matches_per_instance(self, rng):
        c = build_constellation(16)
        T, R, K, sigma2 = 60, 8, 4, 0.3
        F = random_channel(rng, T * R, K).reshape(T, R, K)
        s = c.points[rng.integers(0, 16, (T, K))]
        Y = np.einsum("trk,tk->tr", F, s) + np.sqrt(sigma2) * random_channel(rng, T, R)
        precisions = [3, 4, 6, None]
        batch = detect_batch(F, Y, sigma2, c, bits=precisions)
        for b, got in zip(precisions, batch):
            ref = np.array([detect(build_detector(F[t], sigma2, c, bits=b), Y[t])[0]
                            for t in range(T)])
            np.testing.assert_array_equal(got, ref)
        np.testing.assert_array_equal(detect_batch(F, Y, sigma2, c, bits=4), batch[1])
