import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memsic.errors import ContractViolation, DegenerateChannelError
from memsic.mimo import MimoConfig, build_constellation
from memsic.sic import (
    DetectionOrder,
    flop_count,
    ideal_slice,
    mmse_stage,
    nearest_level_index,
    order_columns,
    realify_matrix,
    realify_vector,
    sic_detect,
    sic_detect_batch,
    stage_flops,
)

from conftest import random_channel


class TestRealify:
    def test_product_commutes(self, rng):
        A = random_channel(rng, 5, 3)
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        np.testing.assert_allclose(realify_matrix(A) @ realify_vector(x), realify_vector(A @ x))

    def test_layout(self):
        A = np.array([[1 + 2j]])
        np.testing.assert_array_equal(realify_matrix(A), [[1, -2], [2, 1]])
        np.testing.assert_array_equal(realify_vector([3 - 4j, 5j]), [3, 0, -4, 5])


class TestOrdering:
    def test_strongest_first(self):
        F = np.array([[1, 3, 2], [0, 0, 0]], dtype=complex)
        assert order_columns(F).sequence == (1, 2, 0)

    def test_ties_keep_index_order(self):
        F = np.array([[1, 1j, -1, 2]], dtype=complex)
        assert order_columns(F).sequence == (3, 0, 1, 2)

    def test_zero_column(self):
        with pytest.raises(DegenerateChannelError):
            order_columns(np.array([[1, 0], [2, 0]], dtype=complex))

    def test_permutation_check(self):
        with pytest.raises(ContractViolation):
            DetectionOrder((0, 0, 2))


class TestMmseStage:
    @settings(max_examples=40, deadline=None)
    @given(K=st.integers(1, 6), extra=st.integers(1, 6), sigma2=st.floats(1e-4, 2.0),
           seed=st.integers(0, 2**32 - 1))
    def test_matches_augmented_least_squares(self, K, extra, sigma2, seed):
        # ridge solution = least squares on [Gt; sigma I] x = [rt; 0]
        rng = np.random.default_rng(seed)
        R = K + extra
        G = random_channel(rng, R, K)
        res = rng.standard_normal(R) + 1j * rng.standard_normal(R)
        Gt, rt = realify_matrix(G), realify_vector(res)
        A = np.vstack([Gt, np.sqrt(sigma2) * np.eye(2 * K)])
        b = np.concatenate([rt, np.zeros(2 * K)])
        ref = np.linalg.lstsq(A, b, rcond=None)[0]
        np.testing.assert_allclose(mmse_stage(G, res, sigma2), ref, rtol=1e-9, atol=1e-12)

    def test_negative_noise(self):
        with pytest.raises(ContractViolation):
            mmse_stage(np.eye(2), np.ones(2), -0.1)


class TestSlicing:
    def test_table_example(self):
        c = build_constellation(16, 0.1)
        e = ideal_slice(0.015, -0.04, c.s_value)
        assert e == pytest.approx(0.1 / np.sqrt(10) - 0.1j / np.sqrt(10))

    def test_brute_force_nearest(self, rng):
        levels = build_constellation(64).levels
        a = rng.uniform(-1.5, 1.5, 10000)
        brute = np.argmin(np.abs(a[:, None] - levels[None, :]), axis=1)
        np.testing.assert_array_equal(nearest_level_index(a, levels), brute)

    def test_fixed_points_and_ties(self):
        levels = build_constellation(16).levels
        np.testing.assert_array_equal(nearest_level_index(levels, levels), np.arange(4))
        mids = (levels[:-1] + levels[1:]) / 2
        np.testing.assert_array_equal(nearest_level_index(mids, levels), np.arange(3))


class TestSicDetect:
    def test_exhaustive_qpsk_noise_free(self, rng):
        c = build_constellation(4)
        F = random_channel(rng, 4, 2)
        for s in itertools.product(c.points, repeat=2):
            s = np.array(s)
            s_hat, _ = sic_detect(F, F @ s, 0.0, c)
            np.testing.assert_allclose(s_hat, s, atol=1e-12)

    def test_single_user(self, rng):
        c = build_constellation(16)
        F = random_channel(rng, 3, 1)
        s_hat, trace = sic_detect(F, F @ c.points[[5]], 0.01, c)
        assert len(trace.r) == 1
        np.testing.assert_allclose(trace.r[0], mmse_stage(F, F @ c.points[[5]], 0.01))

    def test_trace_shapes_and_cancellation(self, rng):
        c = build_constellation(16)
        F = random_channel(rng, 8, 4)
        s = c.points[rng.integers(0, 16, 4)]
        y = F @ s
        s_hat, tr = sic_detect(F, y, 0.05, c)
        assert [r.size for r in tr.r] == [8, 6, 4, 2]
        G = F[:, tr.order.as_array()]
        np.testing.assert_array_equal(tr.G, G)
        for k in range(1, 5):
            resid = y - tr.G_head(k - 1) @ tr.e[:k - 1]
            np.testing.assert_allclose(tr.r[k - 1], mmse_stage(tr.G_tail(k), resid, 0.05))

    def test_batch_matches_single(self, rng):
        c = build_constellation(16)
        T, R, K = 100, 8, 4
        F = random_channel(rng, T * R, K).reshape(T, R, K)
        s = c.points[rng.integers(0, 16, (T, K))]
        Y = np.einsum("trk,tk->tr", F, s) + 0.3 * random_channel(rng, T, R)
        ref = np.array([sic_detect(F[t], Y[t], 0.2, c)[0] for t in range(T)])
        np.testing.assert_array_equal(sic_detect_batch(F, Y, 0.2, c), ref)

    def test_dimension_check(self):
        with pytest.raises(ContractViolation):
            sic_detect(np.ones((3, 2)), np.ones(4), 0.1, build_constellation(4))


class TestFlops:
    def test_32x64(self):
        # independent recount, term by term
        K, R, total = 32, 64, 0
        for k in range(1, K + 1):
            n, m = 2 * (K - k + 1), 2 * R
            gram, load, chol, tri, mf = n * n * m * 2, n, (n ** 3) // 3, 2 * n * n, 2 * n * m
            cancel = 2 * m * 2 * (k - 1)
            total += gram + load + chol + tri + mf + cancel
        assert flop_count(MimoConfig(K, R)) == total == 13074837
        assert 0.3 <= total / 2.68e7 <= 3

    def test_single_stage(self):
        assert stage_flops(1, 1, 2) == 2 * 4 * 4 + 2 + 8 // 3 + 8 + 16
