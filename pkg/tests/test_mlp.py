import numpy as np
import pytest

from ordinoise import labels as lb
from ordinoise import mlp
from ordinoise.errors import EmptyBatchError, InvalidParameterError, ShapeError


def finite_difference_gradient(loss_fn, params, step=1e-5):
    """Central differences on the flattened parameter vector."""
    flat = params.flat()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        up = flat.copy()
        up[i] += step
        down = flat.copy()
        down[i] -= step
        grad[i] = (
            loss_fn(mlp.MlpParams.from_flat(params, up))
            - loss_fn(mlp.MlpParams.from_flat(params, down))
        ) / (2 * step)
    return grad


def assert_gradients_close(analytic, numeric, rel_tol=1e-4):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    big = np.abs(numeric) > 1e-6
    if big.any():
        rel = np.abs(analytic[big] - numeric[big]) / np.abs(numeric[big])
        assert rel.max() < rel_tol, f"max relative error {rel.max():.2e}"
    small = ~big
    if small.any():
        assert np.abs(analytic[small] - numeric[small]).max() < 1e-7


def random_case(seed, kind="soft"):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    h = int(rng.integers(3, 7))
    c = int(rng.integers(3, 6))
    n = int(rng.integers(2, 7))
    params = mlp.init_mlp(d, h, c, int(rng.integers(0, 2**31)))
    features = rng.normal(size=(n, d))
    labels = rng.integers(1, c + 1, size=n)
    rows = lb.label_matrix(kind, labels, c, smoothing=0.2)
    return params, features, rows


class TestInit:
    def test_deterministic(self):
        a = mlp.init_mlp(3, 8, 4, seed=11)
        b = mlp.init_mlp(3, 8, 4, seed=11)
        np.testing.assert_array_equal(a.flat(), b.flat())

    def test_biases_zero(self):
        params = mlp.init_mlp(3, 8, 4, seed=1)
        assert np.all(params.b1 == 0.0)
        assert np.all(params.b2 == 0.0)

    def test_parameter_count(self):
        params = mlp.init_mlp(2, 32, 4, seed=0)
        assert params.param_count() == 2 * 32 + 32 + 32 * 4 + 4 == 228

    def test_bad_dimensions(self):
        with pytest.raises(InvalidParameterError):
            mlp.init_mlp(0, 4, 3, seed=0)


class TestForward:
    def test_zero_network_gives_uniform(self):
        params = mlp.MlpParams(np.zeros((2, 4)), np.zeros(4), np.zeros((4, 3)), np.zeros(3))
        logits = mlp.forward(params, np.array([1.0, -1.0]))
        np.testing.assert_array_equal(logits, np.zeros(3))
        np.testing.assert_allclose(lb.temperature_softmax(logits, 1.0), [1 / 3] * 3)

    def test_hand_computed_unit_network(self):
        # 1 -> 1 -> 2 with unit weights: x=1, hidden max(0,1)=1, logits [1,1]
        params = mlp.MlpParams(np.ones((1, 1)), np.zeros(1), np.ones((1, 2)), np.zeros(2))
        np.testing.assert_array_equal(mlp.forward(params, np.array([1.0])), [1.0, 1.0])

    def test_relu_blocks_negative(self):
        params = mlp.MlpParams(np.ones((1, 1)), np.zeros(1), np.ones((1, 2)), np.zeros(2))
        np.testing.assert_array_equal(mlp.forward(params, np.array([-3.0])), [0.0, 0.0])

    def test_deterministic_repeat(self):
        params = mlp.init_mlp(4, 6, 3, seed=2)
        x = np.random.default_rng(0).normal(size=(5, 4))
        np.testing.assert_array_equal(mlp.forward(params, x), mlp.forward(params, x))

    def test_shape_error(self):
        params = mlp.init_mlp(4, 6, 3, seed=2)
        with pytest.raises(ShapeError):
            mlp.forward(params, np.zeros(3))


class TestBackward:
    def test_zero_gradient_when_prediction_matches_label(self):
        params = mlp.init_mlp(2, 4, 3, seed=3)
        x = np.array([[0.4, -0.2]])
        probs = lb.softmax_rows(mlp.forward(params, x))
        grads = mlp.backward(params, x, probs)
        # gradient at the logit layer is p - l = 0, so w2/b2 gradients vanish
        assert np.abs(grads.w2).max() < 1e-12
        assert np.abs(grads.b2).max() < 1e-12

    @pytest.mark.parametrize("kind", ["hard", "soft", "smoothed"])
    def test_matches_finite_differences(self, kind):
        for seed in range(6):
            params, features, rows = random_case(seed, kind)
            analytic = mlp.backward(params, features, rows).flat()
            numeric = finite_difference_gradient(
                lambda p: mlp.ce_loss(p, features, rows), params
            )
            assert_gradients_close(analytic, numeric)

    def test_batch_duplication_preserves_mean_gradient(self):
        params, features, rows = random_case(13)
        once = mlp.backward(params, features, rows).flat()
        twice = mlp.backward(
            params, np.vstack([features, features]), np.vstack([rows, rows])
        ).flat()
        np.testing.assert_allclose(once, twice, atol=1e-12)

    def test_empty_batch(self):
        params = mlp.init_mlp(2, 4, 3, seed=0)
        with pytest.raises(EmptyBatchError):
            mlp.backward(params, np.zeros((0, 2)), np.zeros((0, 3)))


class TestJocorBackward:
    def test_zero_weight_equals_standalone(self):
        params_1, features, rows = random_case(21)
        params_2 = mlp.init_mlp(*params_1.dims, seed=99)
        grads_1, grads_2 = mlp.jocor_backward(params_1, params_2, features, rows, 0.0)
        np.testing.assert_allclose(
            grads_1.flat(), mlp.backward(params_1, features, rows).flat(), atol=1e-12
        )
        np.testing.assert_allclose(
            grads_2.flat(), mlp.backward(params_2, features, rows).flat(), atol=1e-12
        )

    def test_identical_networks_get_no_divergence_gradient(self):
        params, features, rows = random_case(22)
        twin = params.copy()
        with_reg_1, with_reg_2 = mlp.jocor_backward(params, twin, features, rows, 5.0)
        without_1, without_2 = mlp.jocor_backward(params, twin, features, rows, 0.0)
        assert np.abs(with_reg_1.flat() - without_1.flat()).max() < 1e-6
        assert np.abs(with_reg_2.flat() - without_2.flat()).max() < 1e-6

    @pytest.mark.parametrize("reg_weight", [0.0, 0.1, 1.0])
    def test_matches_finite_differences(self, reg_weight):
        for seed in range(4):
            params_1, features, rows = random_case(seed + 40)
            params_2 = mlp.init_mlp(*params_1.dims, seed=seed + 140)
            grads_1, grads_2 = mlp.jocor_backward(
                params_1, params_2, features, rows, reg_weight
            )
            numeric_1 = finite_difference_gradient(
                lambda p: mlp.jocor_loss(p, params_2, features, rows, reg_weight), params_1
            )
            numeric_2 = finite_difference_gradient(
                lambda p: mlp.jocor_loss(params_1, p, features, rows, reg_weight), params_2
            )
            assert_gradients_close(grads_1.flat(), numeric_1)
            assert_gradients_close(grads_2.flat(), numeric_2)


class TestAdamStep:
    def test_zero_gradient_keeps_params(self):
        params = mlp.init_mlp(2, 4, 3, seed=5)
        zeros = mlp.MlpParams(
            np.zeros_like(params.w1),
            np.zeros_like(params.b1),
            np.zeros_like(params.w2),
            np.zeros_like(params.b2),
        )
        state = mlp.AdamState.for_params(params, learning_rate=0.1)
        updated = mlp.adam_step(params, zeros, state)
        np.testing.assert_array_equal(updated.flat(), params.flat())
        assert state.step == 1

    def test_first_step_is_signed_learning_rate(self):
        params = mlp.init_mlp(2, 4, 3, seed=6)
        rng = np.random.default_rng(0)
        grads = mlp.MlpParams(
            rng.normal(size=params.w1.shape),
            rng.normal(size=params.b1.shape),
            rng.normal(size=params.w2.shape),
            rng.normal(size=params.b2.shape),
        )
        state = mlp.AdamState.for_params(params, learning_rate=1e-3)
        updated = mlp.adam_step(params, grads, state)
        delta = updated.flat() - params.flat()
        # bias-corrected first step: -lr * g / (|g| + eps) ~ -lr * sign(g)
        np.testing.assert_allclose(delta, -1e-3 * np.sign(grads.flat()), rtol=1e-4)

    def test_deterministic(self):
        params = mlp.init_mlp(2, 4, 3, seed=7)
        grads = mlp.backward(
            params, np.array([[1.0, 2.0]]), lb.label_matrix("hard", [1], 3)
        )
        state_a = mlp.AdamState.for_params(params, learning_rate=1e-2)
        state_b = mlp.AdamState.for_params(params, learning_rate=1e-2)
        np.testing.assert_array_equal(
            mlp.adam_step(params, grads, state_a).flat(),
            mlp.adam_step(params, grads, state_b).flat(),
        )

    def test_inputs_not_mutated(self):
        params = mlp.init_mlp(2, 4, 3, seed=8)
        before = params.flat()
        grads = mlp.backward(
            params, np.array([[1.0, 2.0]]), lb.label_matrix("hard", [1], 3)
        )
        state = mlp.AdamState.for_params(params, learning_rate=1e-2)
        mlp.adam_step(params, grads, state)
        np.testing.assert_array_equal(params.flat(), before)

    def test_weight_decay_shrinks_weights(self):
        params = mlp.init_mlp(2, 4, 3, seed=9)
        zeros = mlp.MlpParams(
            np.zeros_like(params.w1),
            np.zeros_like(params.b1),
            np.zeros_like(params.w2),
            np.zeros_like(params.b2),
        )
        state = mlp.AdamState.for_params(params, learning_rate=1e-3, weight_decay=0.1)
        updated = mlp.adam_step(params, zeros, state)
        assert np.abs(updated.w1).sum() < np.abs(params.w1).sum()


class TestTrainingDynamics:
    def test_loss_decreases_on_separable_toy_problem(self):
        rng = np.random.default_rng(0)
        n = 60
        x = np.concatenate([rng.normal(-2.0, 0.3, n), rng.normal(2.0, 0.3, n)])
        features = np.stack([x, rng.normal(0, 0.1, 2 * n)], axis=1)
        labels = np.array([1] * n + [2] * n)
        rows = lb.label_matrix("hard", labels, 2)
        params = mlp.init_mlp(2, 8, 2, seed=4)
        state = mlp.AdamState.for_params(params, learning_rate=1e-2)
        losses = []
        for _ in range(100):
            loss, grads = mlp.loss_and_grads(params, features, rows)
            losses.append(loss)
            params = mlp.adam_step(params, grads, state)
        assert losses[-1] < losses[0] / 10
        for t in range(10, 99):
            assert losses[t + 1] <= losses[t] + 1e-3


class TestParamsCsv:
    def test_round_trip(self):
        params = mlp.init_mlp(3, 5, 4, seed=10)
        text = mlp.params_to_csv(params)
        loaded = mlp.params_from_csv(text)
        np.testing.assert_array_equal(loaded.flat(), params.flat())
        assert loaded.dims == params.dims

    def test_header_is_plain_text(self):
        params = mlp.init_mlp(2, 2, 2, seed=0)
        assert mlp.params_to_csv(params).splitlines()[0] == "tensor,row,col,value"
