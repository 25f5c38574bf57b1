import numpy as np
import pytest

from evoattack.core import SparseSolution
from evoattack.subspace import (
    BinarySubspaceModel,
    PslHyper,
    PslParams,
    RealSubspaceModel,
    SurvivalStats,
    adapt_params,
    recover_solution,
    reduce_solution,
    train_models,
)


def random_solutions(n, d, rng):
    return [
        SparseSolution((rng.random(d) < 0.5).astype(np.uint8), rng.uniform(-50, 50, d))
        for _ in range(n)
    ]


class TestShapes:
    def test_dimensional_contract(self):
        rng = np.random.default_rng(0)
        d, k = 100, 5
        sols = random_solutions(10, d, rng)
        lower, upper = np.full(d, -128.0), np.full(d, 127.0)
        rbm, dae = train_models(sols, k, lower, upper, PslHyper(), rng)
        assert rbm.weights.shape == (100, 5)
        assert rbm.visible_bias.shape == (100,)
        assert rbm.hidden_bias.shape == (5,)
        assert dae.encode_weights.shape == (100, 5)
        assert dae.decode_weights.shape == (5, 100)

    def test_k_larger_than_d_rejected(self):
        rng = np.random.default_rng(1)
        sols = random_solutions(4, 3, rng)
        with pytest.raises(ValueError):
            train_models(sols, 10, np.full(3, -1.0), np.full(3, 1.0), PslHyper(), rng)

    def test_reduce_recover_lengths(self):
        rng = np.random.default_rng(2)
        d, k = 40, 7
        sols = random_solutions(8, d, rng)
        lower, upper = np.full(d, -100.0), np.full(d, 155.0)
        rbm, dae = train_models(sols, k, lower, upper, PslHyper(), rng)
        hb, hr = reduce_solution(sols[0], rbm, dae)
        assert hb.shape == (k,) and hr.shape == (k,)
        assert set(np.unique(hb)) <= {0, 1}
        back = recover_solution(hb, hr, rbm, dae)
        assert len(back) == d
        assert np.isfinite(back.values).all()


class TestDeterministicInference:
    def test_zero_input_zero_bias_thresholds_to_zero(self):
        # sigmoid(0) = 0.5 sits exactly on the threshold and maps to 0
        rbm = BinarySubspaceModel(np.zeros((6, 3)), np.zeros(6), np.zeros(3))
        assert not rbm.encode(np.zeros(6, dtype=np.uint8)).any()

    def test_reduce_is_deterministic(self):
        rng = np.random.default_rng(3)
        d, k = 30, 4
        sols = random_solutions(6, d, rng)
        lower, upper = np.full(d, -90.0), np.full(d, 165.0)
        rbm, dae = train_models(sols, k, lower, upper, PslHyper(), rng)
        a = reduce_solution(sols[2], rbm, dae)
        b = reduce_solution(sols[2], rbm, dae)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_no_nonfinite_values(self):
        rng = np.random.default_rng(4)
        d, k = 25, 3
        sols = random_solutions(5, d, rng)
        lower, upper = np.full(d, -128.0), np.full(d, 127.0)
        rbm, dae = train_models(sols, k, lower, upper, PslHyper(), rng)
        for s in sols:
            hb, hr = reduce_solution(s, rbm, dae)
            assert np.isfinite(hr).all()
            back = recover_solution(hb, hr, rbm, dae)
            assert np.isfinite(back.values).all()


class TestDaeTraining:
    def test_memorizes_all_zero_set(self):
        # identical all-zero magnitude vectors: reconstruction of the zero
        # vector converges below 1e-3 squared error (normalized space)
        rng = np.random.default_rng(5)
        d, k = 60, 8
        u = rng.integers(0, 256, size=d).astype(float)
        lower, upper = -u, 255.0 - u
        data = np.zeros((8, d))
        dae = RealSubspaceModel.train(
            data, k, lower, upper, PslHyper(epochs=3000), np.random.default_rng(6)
        )
        assert dae.reconstruction_error(np.zeros(d)) < 1e-3

    def test_loss_nonincreasing_within_tolerance(self):
        rng = np.random.default_rng(7)
        d, k, n = 60, 8, 20
        lower, upper = np.full(d, -128.0), np.full(d, 127.0)
        data = rng.uniform(lower, upper, size=(n, d)) * 0.2
        for seed in range(3):
            dae = RealSubspaceModel.train(
                data, k, lower, upper, PslHyper(epochs=10), np.random.default_rng(seed)
            )
            hist = dae.loss_history
            assert len(hist) == 10
            for prev, cur in zip(hist, hist[1:]):
                assert cur <= 1.05 * prev

    def test_normalization_uses_fixed_bounds(self):
        d = 4
        lower = np.array([-10.0, -20.0, 0.0, -5.0])
        upper = np.array([10.0, 20.0, 0.0, 15.0])
        dae = RealSubspaceModel(
            np.zeros((d, 2)), np.zeros((2, d)), np.zeros(2), np.zeros(d),
            lower, upper, [],
        )
        z = dae.normalize(np.array([0.0, -20.0, 0.0, 15.0]))
        assert z == pytest.approx([0.5, 0.0, 0.0, 1.0])
        back = dae.denormalize(z)
        assert back == pytest.approx([0.0, -20.0, 0.0, 15.0])


class TestRbmTraining:
    def test_memorizes_singleton_pattern(self):
        d, k = 30, 5
        pattern = (np.random.default_rng(8).random(d) < 0.5).astype(np.uint8)
        data = np.tile(pattern, (10, 1)).astype(float)
        rbm = BinarySubspaceModel.train(
            data, k, PslHyper(epochs=300, rbm_lr=0.1), np.random.default_rng(9)
        )
        recovered = rbm.decode(rbm.encode(pattern))
        assert np.array_equal(recovered, pattern)

    def test_training_is_seed_deterministic(self):
        d, k = 20, 3
        data = (np.random.default_rng(10).random((6, d)) < 0.5).astype(float)
        a = BinarySubspaceModel.train(data, k, PslHyper(), np.random.default_rng(11))
        b = BinarySubspaceModel.train(data, k, PslHyper(), np.random.default_rng(11))
        assert np.array_equal(a.weights, b.weights)


class TestAdaptParams:
    def test_equal_success_rates_give_half(self):
        stats = SurvivalStats(genetic_made=20, genetic_survived=5, model_made=20, model_survived=5)
        bits = np.ones((4, 100))
        out = adapt_params(stats, bits, PslParams(rho=0.5, k=5))
        assert out.rho == pytest.approx(0.5)

    def test_model_failure_clamps_to_floor(self):
        stats = SurvivalStats(genetic_made=20, genetic_survived=10, model_made=20, model_survived=0)
        out = adapt_params(stats, np.ones((4, 100)), PslParams(rho=0.5, k=5))
        assert out.rho == 0.1

    def test_genetic_failure_clamps_to_ceiling(self):
        stats = SurvivalStats(genetic_made=20, genetic_survived=0, model_made=20, model_survived=10)
        out = adapt_params(stats, np.ones((4, 100)), PslParams(rho=0.5, k=5))
        assert out.rho == 0.9

    def test_all_zero_bits_floor_k(self):
        stats = SurvivalStats(genetic_made=1, genetic_survived=0, model_made=1, model_survived=0)
        out = adapt_params(stats, np.zeros((5, 200)), PslParams(rho=0.5, k=9))
        assert out.k == 1

    def test_k_tracks_mean_sparsity(self):
        stats = SurvivalStats(genetic_made=1, genetic_survived=1, model_made=1, model_survived=1)
        d = 3072
        bits = np.zeros((4, d))
        bits[:, :1536] = 1
        out = adapt_params(stats, bits, PslParams(rho=0.5, k=5))
        # ceil(3072/50) = 62 active bits per hidden unit; 1536/62 ~ 24.8
        assert out.k == 25

    def test_bounds_always_hold(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            stats = SurvivalStats(*rng.integers(0, 30, size=4))
            d = int(rng.integers(1, 400))
            bits = (rng.random((int(rng.integers(1, 8)), d)) < rng.random()).astype(float)
            out = adapt_params(stats, bits, PslParams(rho=0.5, k=5))
            assert 0.1 <= out.rho <= 0.9
            assert 1 <= out.k <= 50
