"""Denoiser MLP, time embedding, and Adam tests."""

import numpy as np
import pytest

from cludi.denoiser import (
    DenoiserParams,
    adam_step,
    denoiser_forward,
    forward_cached,
    gelu,
    gelu_grad,
    init_denoiser,
    init_optimizer,
    time_embedding,
)
from cludi.errors import ValidationError

# mpmath oracle, 50 digits
GELU_1 = 0.84119199060827670478
GELU_NEG_HALF = -0.15428599017485607796
GELU_2_25 = 2.2227986701027113893
DGELU_1 = 1.0829640838457825551
DGELU_NEG_HALF = 0.13263009646535768844
EMB_7_DIM4 = [0.6569865987187890904, 0.0069999428334733915033,
              0.75390225434330463814, 0.99997550010004150327]


class TestGelu:
    def test_frozen_values(self):
        assert gelu(np.array(1.0)) == pytest.approx(GELU_1, rel=1e-14)
        assert gelu(np.array(-0.5)) == pytest.approx(GELU_NEG_HALF, rel=1e-14)
        assert gelu(np.array(2.25)) == pytest.approx(GELU_2_25, rel=1e-14)

    def test_zero_fixed_point(self):
        assert gelu(np.array(0.0)) == 0.0

    def test_grad_frozen_values(self):
        assert gelu_grad(np.array(1.0)) == pytest.approx(DGELU_1, rel=1e-13)
        assert gelu_grad(np.array(-0.5)) == pytest.approx(DGELU_NEG_HALF,
                                                          rel=1e-13)

    def test_grad_matches_finite_differences(self):
        xs = np.linspace(-4.0, 4.0, 33)
        h = 1e-6
        fd = (gelu(xs + h) - gelu(xs - h)) / (2.0 * h)
        np.testing.assert_allclose(gelu_grad(xs), fd, rtol=1e-7, atol=1e-9)


class TestTimeEmbedding:
    def test_t_zero_is_zeros_then_ones(self):
        emb = time_embedding(0, 8, 1000)
        np.testing.assert_array_equal(emb[:4], np.zeros(4))
        np.testing.assert_array_equal(emb[4:], np.ones(4))

    def test_frozen_dim4_value(self):
        np.testing.assert_allclose(time_embedding(7, 4, 1000), EMB_7_DIM4,
                                   rtol=1e-13)

    def test_frequency_endpoints(self):
        # fastest component is sin(t), slowest sin(t / horizon)
        emb = time_embedding(3, 4, 500)
        assert emb[0] == pytest.approx(np.sin(3.0), rel=1e-14)
        assert emb[1] == pytest.approx(np.sin(3.0 / 500.0), rel=1e-14)

    def test_adjacent_steps_distinguishable_at_min_width(self):
        assert not np.allclose(time_embedding(5, 2, 1000),
                               time_embedding(6, 2, 1000))

    def test_batch_shape(self):
        emb = time_embedding(np.arange(10), 64, 1000)
        assert emb.shape == (10, 64)

    def test_rejects_odd_or_tiny_width(self):
        with pytest.raises(ValidationError):
            time_embedding(5, 3, 1000)
        with pytest.raises(ValidationError):
            time_embedding(5, 0, 1000)


class TestInitAndForward:
    def test_init_shapes_and_bounds(self):
        params = init_denoiser(4, 6, 8, (32, 16), 1000,
                               np.random.default_rng(0))
        dims = [(18, 32), (32, 16), (16, 4)]
        assert [w.shape for w in params.weights] == dims
        for w in params.weights:
            assert np.all(np.abs(w) <= 1.0 / np.sqrt(w.shape[0]))
        for b in params.biases:
            np.testing.assert_array_equal(b, np.zeros_like(b))

    def test_init_seeded_determinism(self):
        a = init_denoiser(3, 5, 4, (8,), 100, np.random.default_rng(42))
        b = init_denoiser(3, 5, 4, (8,), 100, np.random.default_rng(42))
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_zero_final_layer_gives_zero_output(self):
        params = init_denoiser(3, 2, 4, (8,), 100, np.random.default_rng(1))
        params.weights[-1][:] = 0.0
        out = denoiser_forward(params, np.ones(3), np.ones(2), 10)
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_single_and_batch_agree(self):
        params = init_denoiser(3, 5, 4, (16, 8), 1000,
                               np.random.default_rng(2))
        rng = np.random.default_rng(3)
        z = rng.standard_normal((6, 3))
        x = rng.standard_normal((6, 5))
        t = rng.integers(1, 1000, size=6)
        batch = denoiser_forward(params, z, x, t)
        assert batch.shape == (6, 3)
        for i in range(6):
            row = denoiser_forward(params, z[i], x[i], int(t[i]))
            np.testing.assert_allclose(batch[i], row, rtol=1e-12, atol=1e-14)

    def test_scalar_t_broadcasts(self):
        params = init_denoiser(2, 2, 4, (8,), 100, np.random.default_rng(4))
        rng = np.random.default_rng(5)
        z = rng.standard_normal((3, 2))
        x = rng.standard_normal((3, 2))
        np.testing.assert_array_equal(
            denoiser_forward(params, z, x, 7),
            denoiser_forward(params, z, x, np.full(3, 7)),
        )

    def test_purity_inputs_untouched(self):
        params = init_denoiser(2, 2, 4, (8,), 100, np.random.default_rng(6))
        z = np.ones((2, 2))
        x = np.ones((2, 2))
        z_copy, x_copy = z.copy(), x.copy()
        denoiser_forward(params, z, x, np.array([1, 2]))
        np.testing.assert_array_equal(z, z_copy)
        np.testing.assert_array_equal(x, x_copy)

    def test_rows_independent(self):
        params = init_denoiser(2, 3, 4, (8,), 100, np.random.default_rng(7))
        rng = np.random.default_rng(8)
        z = rng.standard_normal((4, 2))
        x = rng.standard_normal((4, 3))
        t = np.array([1, 2, 3, 4])
        full = denoiser_forward(params, z, x, t)
        z2 = z.copy()
        z2[3] = 99.0
        partial = denoiser_forward(params, z2, x, t)
        np.testing.assert_array_equal(full[:3], partial[:3])

    def test_cache_layers_line_up(self):
        params = init_denoiser(2, 2, 4, (8, 6), 100, np.random.default_rng(9))
        out, cache = forward_cached(params, np.ones((3, 2)), np.ones((3, 2)),
                                    np.array([1, 2, 3]))
        assert len(cache["activations"]) == 4
        assert len(cache["pre"]) == 3
        np.testing.assert_array_equal(cache["activations"][-1], out)

    def test_rejects_bad_shapes(self):
        params = init_denoiser(3, 5, 4, (8,), 100, np.random.default_rng(10))
        with pytest.raises(ValidationError):
            denoiser_forward(params, np.ones(2), np.ones(5), 1)
        with pytest.raises(ValidationError):
            denoiser_forward(params, np.ones(3), np.ones(4), 1)
        with pytest.raises(ValidationError):
            denoiser_forward(params, np.ones((2, 3)), np.ones((3, 5)),
                             np.array([1, 2]))

    def test_rejects_inconsistent_construction(self):
        with pytest.raises(ValidationError):
            DenoiserParams(embed_dim=2, feature_dim=2, time_dim=4, horizon=10,
                           weights=[np.ones((8, 3))], biases=[np.ones(3)])
        with pytest.raises(ValidationError):
            init_denoiser(2, 2, 4, (), 100, np.random.default_rng(0))


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        params = [np.array([1.0, -2.0]), np.array([[3.0]])]
        grads = [np.zeros(2), np.zeros((1, 1))]
        state = init_optimizer(params)
        new_params, new_state = adam_step(params, grads, state)
        for p, q in zip(params, new_params):
            np.testing.assert_array_equal(p, q)
        assert new_state.step == 1

    def test_first_step_closed_form(self):
        # bias correction makes m_hat = g, v_hat = g^2 on step one, so the
        # update is lr * g / (|g| + eps)
        g = np.array([2.0, -0.5])
        params = [np.array([1.0, 1.0])]
        state = init_optimizer(params)
        lr, eps = 1e-3, 1e-8
        new_params, _ = adam_step(params, [g], state, lr=lr, eps=eps)
        expected = params[0] - lr * g / (np.abs(g) + eps)
        np.testing.assert_allclose(new_params[0], expected, rtol=1e-15)

    def test_two_steps_match_reference_recurrence(self):
        rng = np.random.default_rng(11)
        p0 = rng.standard_normal(5)
        g1, g2 = rng.standard_normal(5), rng.standard_normal(5)
        lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
        params, state = adam_step([p0], [g1], init_optimizer([p0]),
                                  lr, b1, b2, eps)
        params, state = adam_step(params, [g2], state, lr, b1, b2, eps)
        # independent recurrence
        m = (1 - b1) * g1
        v = (1 - b2) * g1 * g1
        p = p0 - lr * (m / (1 - b1)) / (np.sqrt(v / (1 - b2)) + eps)
        m = b1 * m + (1 - b1) * g2
        v = b2 * v + (1 - b2) * g2 * g2
        p = p - lr * (m / (1 - b1 ** 2)) / (np.sqrt(v / (1 - b2 ** 2)) + eps)
        np.testing.assert_allclose(params[0], p, rtol=1e-14)

    def test_pure_inputs_untouched(self):
        p = [np.array([1.0])]
        g = [np.array([2.0])]
        state = init_optimizer(p)
        adam_step(p, g, state)
        np.testing.assert_array_equal(p[0], [1.0])
        np.testing.assert_array_equal(state.m[0], [0.0])
        assert state.step == 0

    def test_rejects_mismatches(self):
        p = [np.ones(2)]
        state = init_optimizer(p)
        with pytest.raises(ValidationError):
            adam_step(p, [np.ones(3)], state)
        with pytest.raises(ValidationError):
            adam_step(p, [np.ones(2)], state, lr=0.0)
        with pytest.raises(ValidationError):
            adam_step(p, [np.ones(2), np.ones(1)], state)
