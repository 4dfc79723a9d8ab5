import numpy as np
import pytest
from helpers import perturbed, random_tim_config, rel_err
from hypothesis import given, settings
from hypothesis import strategies as st

from timgcn.linalg import finite_diff_grad
from timgcn.tim import (PRESETS, BranchSpec, TimConfig, constant_kernel_config, embedding_dim,
                        init_tim_params, sample_subsequences, tim_backward, tim_branch_forward,
                        tim_forward, tim_forward_all)

BASE = PRESETS["tim-5-10"]


def one_branch(m, *kernels):
    return TimConfig((BranchSpec(m, kernels),))


class TestConfig:
    def test_base_preset_rows(self):
        rows = [(b.subseq_len, n, s) for b in BASE.branches for n, s in b.kernels]
        assert rows == [(5, 12, 2), (5, 9, 3), (10, 9, 3), (10, 7, 5), (10, 6, 7), (10, 1, 1)]
        assert BASE.M_J == 10

    def test_embedding_dim_base_preset(self):
        assert 12 * 4 + 9 * 3 + 9 * 8 + 7 * 6 + 6 * 4 + 1 * 10 == 223
        assert embedding_dim(BASE) == 223

    def test_embedding_dim_small(self):
        assert embedding_dim(one_branch(5, (1, 5))) == 1
        assert embedding_dim(one_branch(10, (1, 1))) == 10

    def test_15_branch_preset_is_larger(self):
        assert embedding_dim(PRESETS["tim-5-10-15"]) == 223 + 9 * 12 + 7 * 9 + 6 * 6
        assert PRESETS["tim-5-10-15"].M_J == 15

    @pytest.mark.parametrize("m,kernels", [(3, ((1, 4),)), (0, ((1, 1),)), (5, ((0, 2),)), (5, ())])
    def test_invalid_branch(self, m, kernels):
        with pytest.raises(ValueError):
            BranchSpec(m, kernels)

    def test_roundtrip_dict(self):
        assert TimConfig.from_dict(BASE.to_dict()) == BASE

    @pytest.mark.parametrize("lens,preset", [((5, 10), "tim-5-10"), ((5, 10, 15), "tim-5-10-15")])
    def test_constant_kernel_matches_size(self, lens, preset):
        target = embedding_dim(PRESETS[preset])
        cfg = constant_kernel_config(lens, target)
        assert abs(embedding_dim(cfg) - target) <= 0.05 * target
        assert {s for b in cfg.branches for _, s in b.kernels} == {1, 2, 3}
        assert cfg.M_J == max(lens)

    def test_constant_kernel_counts(self):
        # 5-10: 166 + 11 * n3 closest to 223 at n3 = 5
        cfg = constant_kernel_config((5, 10), 223)
        assert [b.kernels for b in cfg.branches] == [((12, 2), (5, 3)), ((12, 2), (5, 3)), ((1, 1),)]
        assert embedding_dim(cfg) == 221


class TestSampling:
    def test_5_10(self):
        x = np.arange(10.0)
        cfg = TimConfig((BranchSpec(5, ((1, 1),)), BranchSpec(10, ((1, 1),))))
        short, full = sample_subsequences(x, cfg)
        np.testing.assert_array_equal(short, x[5:])
        np.testing.assert_array_equal(full, x)

    def test_full_length_is_identity(self):
        x = np.random.default_rng(0).normal(size=7)
        np.testing.assert_array_equal(sample_subsequences(x, one_branch(7, (1, 1)))[0], x)

    def test_length_one_suffix(self):
        cfg = TimConfig((BranchSpec(1, ((1, 1),)), BranchSpec(3, ((1, 1),))))
        np.testing.assert_array_equal(sample_subsequences(np.array([1.0, 2.0, 3.0]), cfg)[0], [3.0])


class TestBranchForward:
    def test_pass_through(self):
        x = np.random.default_rng(1).normal(size=6)
        out = tim_branch_forward(x, BranchSpec(6, ((1, 1),)), [np.ones((1, 1))], [np.zeros(1)])
        np.testing.assert_array_equal(out, x)

    def test_length(self):
        out = tim_branch_forward(np.ones(5), BranchSpec(5, ((2, 2),)), [np.ones((2, 2))], [np.zeros(2)])
        assert out.shape == (8,)

    def test_zero(self):
        x = np.random.default_rng(2).normal(size=10)
        b = BASE.branches[1]
        ws = [np.zeros((n, s)) for n, s in b.kernels]
        bs = [np.zeros(n) for n, _ in b.kernels]
        np.testing.assert_array_equal(tim_branch_forward(x, b, ws, bs), np.zeros(b.out_dim))


class TestForward:
    def test_base_preset_length(self):
        params = init_tim_params(BASE, np.random.default_rng(0))
        assert tim_forward(np.ones(10), BASE, params).shape == (223,)

    def test_pass_through_only(self):
        cfg = one_branch(4, (1, 1))
        x = np.array([3.0, -1.0, 2.0, 5.0])
        np.testing.assert_array_equal(tim_forward(x, cfg, init_tim_params(cfg, np.random.default_rng(0))), x)

    def test_concatenation_order(self):
        cfg = TimConfig((BranchSpec(3, ((2, 2),)), BranchSpec(4, ((1, 1),))))
        params = {"tim.0.0.w": np.array([[1.0, 0.0], [0.0, 1.0]]), "tim.0.0.b": np.array([0.0, 100.0]),
                  "tim.1.0.w": np.array([[2.0]]), "tim.1.0.b": np.array([0.0])}
        x = np.array([1.0, 2.0, 3.0, 4.0])
        # branch 0 sees [2,3,4]; kernel 0 takes older tap, kernel 1 newer tap (+100); then branch 1 doubles x
        expected = [2, 3, 103, 104, 2, 4, 6, 8]
        np.testing.assert_array_equal(tim_forward(x, cfg, params), expected)
        np.testing.assert_array_equal(tim_forward_all(x[None], cfg, params)[0][0], expected)

    def test_vectorized_matches_reference(self):
        rng = np.random.default_rng(3)
        params = init_tim_params(BASE, rng)
        params = {k: v + rng.normal(scale=0.1, size=v.shape) for k, v in params.items()}
        X = rng.normal(size=(2, 12, 10))
        E, _ = tim_forward_all(X, BASE, params)
        assert E.shape == (2, 12, 223)
        for b in range(2):
            for k in range(12):
                np.testing.assert_allclose(E[b, k], tim_forward(X[b, k], BASE, params), rtol=1e-12, atol=1e-12)

    def test_per_coordinate_matches_reference(self):
        rng = np.random.default_rng(4)
        cfg = PRESETS["tim-toy"]
        params = init_tim_params(cfg, rng, K=3)
        params = {k: v + rng.normal(scale=0.1, size=v.shape) for k, v in params.items()}
        X = rng.normal(size=(3, 10))
        E, _ = tim_forward_all(X, cfg, params)
        for k in range(3):
            np.testing.assert_allclose(E[k], tim_forward(X[k], cfg, params, row=k), rtol=1e-12)

    def test_single_row(self):
        params = init_tim_params(BASE, np.random.default_rng(5))
        x = np.random.default_rng(6).normal(size=10)
        np.testing.assert_allclose(tim_forward_all(x[None], BASE, params)[0][0], tim_forward(x, BASE, params))

    def test_duplicate_row(self):
        params = init_tim_params(BASE, np.random.default_rng(7))
        x = np.random.default_rng(8).normal(size=(1, 10))
        E, _ = tim_forward_all(np.vstack([x, x]), BASE, params)
        np.testing.assert_array_equal(E[0], E[1])

    def test_shape_k12(self):
        params = init_tim_params(BASE, np.random.default_rng(9))
        assert tim_forward_all(np.zeros((12, 10)), BASE, params)[0].shape == (12, 223)

    @given(st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_row_permutation(self, seed):
        rng = np.random.default_rng(seed)
        params = init_tim_params(BASE, rng)
        X = rng.normal(size=(6, 10))
        perm = rng.permutation(6)
        np.testing.assert_array_equal(tim_forward_all(X[perm], BASE, params)[0],
                                      tim_forward_all(X, BASE, params)[0][perm])

    @given(st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_suffix_semantics(self, seed):
        rng = np.random.default_rng(seed)
        params = init_tim_params(BASE, rng)
        x = rng.normal(size=10)
        y = x.copy()
        y[:5] = rng.normal(size=5)  # frames older than -5
        d1 = BASE.branches[0].out_dim
        np.testing.assert_array_equal(tim_forward(x, BASE, params)[:d1], tim_forward(y, BASE, params)[:d1])

    @given(st.integers(0, 2**31))
    @settings(max_examples=200, deadline=None)
    def test_embedding_dim_property(self, seed):
        rng = np.random.default_rng(seed)
        cfg = random_tim_config(rng)
        params = init_tim_params(cfg, rng)
        assert tim_forward(rng.normal(size=cfg.M_J), cfg, params).size == embedding_dim(cfg)


class TestBackward:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("per_coordinate", [False, True])
    def test_fd(self, seed, per_coordinate):
        rng = np.random.default_rng(seed)
        cfg = random_tim_config(rng, max_len=8, max_branches=2, max_entries=2, max_n=3)
        K = 2
        params = init_tim_params(cfg, rng, K=K if per_coordinate else None)
        params = {k: v + rng.normal(scale=0.3, size=v.shape) for k, v in params.items()}
        assert sum(n * (s + 1) for b in cfg.branches for n, s in b.kernels) <= 50
        X = rng.normal(size=(3, K, cfg.M_J))
        G = rng.normal(size=(3, K, embedding_dim(cfg)))
        E, cache = tim_forward_all(X, cfg, params)
        grads, dX = tim_backward(cache, G, params, need_input_grad=True)
        assert list(grads) == list(params)

        def loss(p, x=X):
            return float((tim_forward_all(x, cfg, p)[0] * G).sum())

        for name in params:
            num = finite_diff_grad(lambda t: loss(perturbed(params, name, t)), params[name].ravel())
            assert rel_err(grads[name].ravel(), num) < 1e-4, name
        num_x = finite_diff_grad(lambda t: loss(params, t.reshape(X.shape)), X.ravel())
        assert rel_err(dX.ravel(), num_x) < 1e-4

    def test_sum_output_base_preset(self):
        rng = np.random.default_rng(11)
        params = init_tim_params(BASE, rng)
        x = rng.normal(size=(1, 10))
        _, cache = tim_forward_all(x, BASE, params)
        grads, _ = tim_backward(cache, np.ones((1, 223)), params)
        for name in params:
            num = finite_diff_grad(
                lambda t: float(tim_forward_all(x, BASE, perturbed(params, name, t))[0].sum()),
                params[name].ravel())
            assert rel_err(grads[name].ravel(), num) < 1e-4, name
