"""Forward-path contracts: pooling, disentanglement, confidence, weighted
similarity, batched matrix vs a per-pair loop oracle, checkpoint IO."""

import math

import numpy as np
import pytest

from crossvid.errors import CheckpointError, ParameterError
from crossvid.model import (ModelParams, batch_similarity_matrix,
                            check_bank_compat, confidence, disentangle,
                            init_params, load_checkpoint, make_view,
                            mlp_confidence, pool_attention, pool_pairs,
                            save_checkpoint, text_conditioned_pool,
                            weighted_similarity)
from crossvid.synth import oracle_cosine, oracle_similarity, oracle_softmax


def params_for(d=8, k=2, seed=0):
    return init_params(d, k, seed=seed)


class TestPooling:
    def test_single_frame_is_identity(self):
        rng = np.random.default_rng(0)
        t = rng.standard_normal((1, 6))
        f = rng.standard_normal((1, 6))
        for tau in (0.5, 3.0, 10.0):
            out = text_conditioned_pool(t, f, tau)
            assert np.allclose(out, f, atol=1e-15)

    def test_identical_frames_collapse(self):
        rng = np.random.default_rng(1)
        t = rng.standard_normal((1, 4))
        frame = rng.standard_normal(4)
        f = np.tile(frame, (5, 1))
        out = text_conditioned_pool(t, f, 3.0)
        assert np.allclose(out, frame, atol=1e-12)

    def test_hand_case_direct_formula(self):
        # T=[1,0], F=I2, tau=1: weights are softmax([1,0])
        t = np.array([[1.0, 0.0]])
        f = np.eye(2)
        w0 = math.e / (math.e + 1.0)
        out = text_conditioned_pool(t, f, 1.0)
        assert np.allclose(out, [[w0, 1.0 - w0]], atol=1e-14)
        attn = pool_attention(t, f, 1.0)
        assert np.allclose(attn, [[w0, 1.0 - w0]], atol=1e-14)

    def test_attention_normalized_and_shift_invariant(self):
        rng = np.random.default_rng(2)
        t = rng.standard_normal((1, 5))
        f = rng.standard_normal((7, 5))
        a = pool_attention(t, f, 3.0)
        assert (a >= 0).all()
        assert abs(a.sum() - 1.0) < 1e-9
        # adding a constant to all frame logits = shifting f along t
        shifted = f + 4.0 * t / float(t @ t.T)
        a2 = pool_attention(t, shifted, 3.0)
        assert np.allclose(a, a2, atol=1e-9)

    def test_bad_temperature(self):
        with pytest.raises(ParameterError):
            text_conditioned_pool(np.ones((1, 2)), np.ones((3, 2)), 0.0)

    def test_pool_pairs_matches_single_pool(self):
        rng = np.random.default_rng(3)
        T = rng.standard_normal((3, 6))
        F = rng.standard_normal((4, 2, 6))
        V = pool_pairs(T, F, 3.0)
        for i in range(3):
            for j in range(4):
                single = text_conditioned_pool(T[i:i + 1], F[j], 3.0)
                assert np.allclose(V[i * 4 + j], single[0], atol=1e-12)


class TestDisentangle:
    def test_zero_input(self):
        p = params_for()
        out = disentangle(p, np.zeros(8), "text")
        assert np.array_equal(out, np.zeros((2, 4)))

    def test_k1_plain_linear_map(self):
        p = init_params(6, 1, seed=4)
        x = np.arange(6.0)
        out = disentangle(p, x, "video")
        assert np.allclose(out, (x @ p.w_v[0].T).reshape(1, -1), atol=1e-15)

    def test_hand_set_blocks(self):
        p = params_for(d=4, k=2)
        p.w_t[0] = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
        p.w_t[1] = np.array([[0.0, 0.0, 2.0, 0.0], [0.0, 0.0, 0.0, 2.0]])
        out = disentangle(p, np.array([1.0, 2.0, 3.0, 4.0]), "text")
        assert np.allclose(out, [[1.0, 2.0], [6.0, 8.0]], atol=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(5)
        p = params_for()
        x, y = rng.standard_normal(8), rng.standard_normal(8)
        a, b = 1.3, -0.7
        lhs = disentangle(p, a * x + b * y, "tags_visual")
        rhs = a * disentangle(p, x, "tags_visual") \
            + b * disentangle(p, y, "tags_visual")
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestConfidence:
    def test_all_zero_weights_give_half(self):
        p = params_for()
        p.mlp_w1[:] = 0
        p.mlp_w2[:] = 0
        rng = np.random.default_rng(6)
        vecs = [rng.standard_normal(4) for _ in range(4)]
        assert confidence(p, *vecs) == pytest.approx(0.5, abs=1e-15)

    def test_bias_only_path(self):
        p = params_for()
        p.mlp_w1[:] = 0
        p.mlp_w2[:] = 0
        p.mlp_b2[:] = 1.25
        zeros = [np.zeros(4)] * 4
        expected = 1.0 / (1.0 + math.exp(-1.25))
        assert confidence(p, *zeros) == pytest.approx(expected, abs=1e-15)

    def test_matches_composed_oracle(self):
        rng = np.random.default_rng(7)
        p = params_for()
        vecs = [rng.standard_normal(4) for _ in range(4)]
        x = np.concatenate(vecs)
        h = np.maximum(p.mlp_w1 @ x + p.mlp_b1[0], 0.0)
        z = float(p.mlp_w2 @ h + p.mlp_b2[0])
        expected = 1.0 / (1.0 + math.exp(-z))
        assert confidence(p, *vecs) == pytest.approx(expected, abs=1e-12)


class TestWeightedSimilarity:
    def test_identical_sets_unit_confidence(self):
        rng = np.random.default_rng(8)
        e = rng.standard_normal((3, 4))
        assert weighted_similarity(e, e.copy(), [1 / 3] * 3) \
            == pytest.approx(1.0, abs=1e-12)

    def test_zero_confidence_annihilates(self):
        rng = np.random.default_rng(9)
        a, b = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
        assert weighted_similarity(a, b, np.zeros(4)) == 0.0

    def test_hand_case_cosines_one_zero(self):
        e_t = np.array([[1.0, 0.0], [0.0, 2.0]])
        e_v = np.array([[3.0, 0.0], [5.0, 0.0]])   # cosines: 1 and 0
        s = weighted_similarity(e_t, e_v, [0.3, 0.9])
        assert s == pytest.approx(0.3, abs=1e-12)
        assert oracle_similarity(e_t, e_v, [0.3, 0.9]) \
            == pytest.approx(0.3, abs=1e-12)

    def test_bound_by_sum_of_confidences(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            k = int(rng.integers(1, 5))
            a = rng.standard_normal((k, 6))
            b = rng.standard_normal((k, 6))
            c = rng.uniform(0, 1, size=k)
            s = weighted_similarity(a, b, c)
            assert abs(s) <= c.sum() + 1e-12
            assert c.sum() <= k


def _loop_similarity_oracle(p, T, A_t, F, A_v):
    """Per-pair reference: pooling, projections, confidence, and the
    weighted cosine sum built from plain loops and the synth oracles."""
    nq, ng = T.shape[0], F.shape[0]
    S = np.zeros((nq, ng))
    for i in range(nq):
        for j in range(ng):
            logits = [float(T[i] @ F[j, f]) for f in range(F.shape[1])]
            attn = oracle_softmax(logits, p.tau_a)
            v = sum(a * F[j, f] for f, a in enumerate(attn))
            e_v = [w @ v for w in p.w_v]
            e_t = [w @ T[i] for w in p.w_t]
            e_av = [w @ A_v[j] for w in p.w_av]
            e_at = [w @ A_t[i] for w in p.w_at]
            total = 0.0
            for k in range(p.k):
                c = confidence(p, e_v[k], e_t[k], e_av[k], e_at[k])
                total += c * oracle_cosine(e_t[k], e_v[k])
            S[i, j] = total
    return S


class TestBatchSimilarity:
    def test_batch_of_one_reduces_to_pair(self):
        rng = np.random.default_rng(11)
        p = params_for()
        T = rng.standard_normal((1, 8))
        F = rng.standard_normal((1, 3, 8))
        A_v = rng.standard_normal((1, 8))
        A_t = rng.standard_normal((1, 8))
        S = batch_similarity_matrix(p, T, A_t, F, A_v)
        assert S.shape == (1, 1)
        oracle = _loop_similarity_oracle(p, T, A_t, F, A_v)
        assert np.allclose(S, oracle, atol=1e-12)

    def test_gallery_permutation_permutes_columns(self):
        rng = np.random.default_rng(12)
        p = params_for()
        T = rng.standard_normal((3, 8))
        F = rng.standard_normal((4, 2, 8))
        A_v = rng.standard_normal((4, 8))
        A_t = rng.standard_normal((3, 8))
        S = batch_similarity_matrix(p, T, A_t, F, A_v)
        perm = np.array([2, 0, 3, 1])
        S_perm = batch_similarity_matrix(p, T, A_t, F[perm], A_v[perm])
        assert np.allclose(S_perm, S[:, perm], atol=1e-12)

    def test_three_by_three_matches_loop_oracle(self):
        rng = np.random.default_rng(13)
        p = params_for()
        T = rng.standard_normal((3, 8))
        F = rng.standard_normal((3, 2, 8))
        A_v = rng.standard_normal((3, 8))
        A_t = rng.standard_normal((3, 8))
        S = batch_similarity_matrix(p, T, A_t, F, A_v)
        oracle = _loop_similarity_oracle(p, T, A_t, F, A_v)
        assert np.allclose(S, oracle, atol=1e-12)

    def test_video_scale_invariance_with_fixed_confidence(self):
        # single-frame banks make pooling the identity, so scaling the video
        # stream scales the concepts; cosine cancels the scale exactly
        rng = np.random.default_rng(14)
        p = params_for()
        T = rng.standard_normal((3, 8))
        F = rng.standard_normal((3, 1, 8))
        A_v = rng.standard_normal((3, 8))
        A_t = rng.standard_normal((3, 8))
        fixed = [np.full((9, 1), 0.6) for _ in range(p.k)]
        S1 = batch_similarity_matrix(p, T, A_t, F, A_v, fixed_conf=fixed)
        lam = 4.7
        S2 = batch_similarity_matrix(p, T, A_t, lam * F, lam * A_v,
                                     fixed_conf=fixed)
        assert np.allclose(S1, S2, atol=1e-9)
        assert np.argmax(S1, axis=1).tolist() == np.argmax(S2, axis=1).tolist()


class TestCheckpoints:
    def test_roundtrip_with_train_state_is_exact(self, tmp_path):
        p = params_for(d=8, k=2, seed=20)
        items = p.param_items()
        state = {
            "step": 17, "epoch": 2, "batch": 1,
            "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
            "base_lr": 1e-3, "warmup_steps": 100,
            "m": [np.random.default_rng(1).standard_normal(a.shape)
                  for _, a in items],
            "v": [np.abs(np.random.default_rng(2).standard_normal(a.shape))
                  for _, a in items],
        }
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, p, seed=5, step=17, train_state=state)
        loaded, header, train_arrays = load_checkpoint(path)
        for (name, a), (_, b) in zip(items, loaded.param_items()):
            assert np.array_equal(a, b), name
        assert header["seed"] == 5
        assert train_arrays["state"]["step"] == 17
        for (name, _), m_ref in zip(items, state["m"]):
            assert np.array_equal(train_arrays["m"][name], m_ref)

    def test_eval_payload_is_f32_rounded(self, tmp_path):
        p = params_for(d=8, k=2, seed=21)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, p, seed=0, step=0, train_state=None)
        loaded, _, train_arrays = load_checkpoint(path)
        assert train_arrays is None
        for (_, a), (_, b) in zip(p.param_items(), loaded.param_items()):
            assert np.allclose(a, b, atol=1e-6)
            assert np.array_equal(b, b.astype(np.float32).astype(np.float64))

    def test_bank_mismatch_rejected(self, tiny_bank, tmp_path):
        p = params_for(d=16, k=2, seed=22)
        check = pytest.raises(CheckpointError)
        with check:
            check_bank_compat(p, tiny_bank)

    def test_corrupt_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
