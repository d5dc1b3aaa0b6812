"""
Unit tests for keypoint diffusion, the denoisers and denoiser training
"""

import numpy as np
import pytest

from epivo.core.errors import ConfigError, DataError, ParseError
from epivo.diffusion import (
    KeypointState,
    MLPDenoiser,
    NoiseSchedule,
    TargetDenoiser,
    TrainingConfig,
    forward_diffuse,
    geometric_oracle_denoiser,
    load_denoiser,
    make_context,
    predicted_clean,
    refine,
    reverse_step,
    save_denoiser,
    train_denoiser,
)
from epivo.diffusion.network import PARAMETER_ORDER, STATIC_DIM
from epivo.diffusion.training import (
    RefinementLossWeights,
    build_training_set,
    loss_and_gradients,
    sample_batch,
    sampson_with_gradient,
)
from epivo.geometry.epipolar import fundamental_from_pose, sampson_residuals
from epivo.matching.types import correspondence_arrays
from epivo.pose.solvers import pixel_fundamental
from epivo.simulation.pseudo_gt import pseudo_ground_truth
from tests.helpers import noisy_pair


def _random_inputs(model: MLPDenoiser, schedule: NoiseSchedule, n: int = 6, seed: int = 0):
    rng = np.random.default_rng(seed)
    static = rng.normal(size=(n, STATIC_DIM))
    kt = rng.normal(size=(n, 4))
    t = rng.integers(1, schedule.T + 1, size=n)
    alpha_bar = schedule.alpha_bars[t]
    return model.inputs(static, kt, t, alpha_bar, schedule.T), kt, alpha_bar


class TestNoiseSchedule:
    """Tests for the linear variance schedule"""

    def test_alpha_bar_decreasing(self):
        """ᾱ starts at 1 and decreases strictly"""
        schedule = NoiseSchedule.linear(50)
        assert schedule.alpha_bars[0] == 1.0
        assert np.all(np.diff(schedule.alpha_bars) < 0)
        assert len(schedule.alpha_bars) == schedule.T + 1

    def test_rejects_beta_outside_unit_interval(self):
        """A beta of 1 is not a valid variance"""
        with pytest.raises(ConfigError):
            NoiseSchedule(np.array([0.1, 1.0]))

    def test_rejects_zero_steps(self):
        """T must be at least one"""
        with pytest.raises(ConfigError):
            NoiseSchedule.linear(0)

    def test_step_out_of_range(self):
        """Steps past T are rejected"""
        with pytest.raises(ConfigError):
            NoiseSchedule.linear(10).alpha_bar(11)

    def test_dict_round_trip(self):
        """to_dict / from_dict keep every beta"""
        schedule = NoiseSchedule.linear(12, 1e-3, 0.05)
        assert np.array_equal(NoiseSchedule.from_dict(schedule.to_dict()).betas, schedule.betas)


class TestForwardProcess:
    """Tests for the forward corruption and clean prediction"""

    def test_step_zero_is_identity(self):
        """t = 0 returns the clean offsets"""
        k0 = KeypointState(np.arange(8.0).reshape(2, 4), 0)
        kt, _ = forward_diffuse(k0, 0, NoiseSchedule.linear(10), seed=1)
        assert np.allclose(kt.coords, k0.coords)

    def test_predicted_clean_inverts_forward(self):
        """Knowing the exact ε recovers k₀"""
        schedule = NoiseSchedule.linear(20)
        k0 = KeypointState(np.random.default_rng(0).normal(size=(5, 4)), 0)
        kt, eps = forward_diffuse(k0, 13, schedule, seed=2)
        assert np.allclose(predicted_clean(kt, eps, schedule), k0.coords, atol=1e-12)

    def test_seeded(self):
        """The same seed draws the same noise"""
        schedule = NoiseSchedule.linear(20)
        k0 = KeypointState(np.zeros((3, 4)), 0)
        a, _ = forward_diffuse(k0, 5, schedule, seed=9)
        b, _ = forward_diffuse(k0, 5, schedule, seed=9)
        assert np.array_equal(a.coords, b.coords)

    def test_state_validates_shape(self):
        """Rows must have four coordinates"""
        with pytest.raises(DataError):
            KeypointState(np.zeros((2, 3)), 0)

    def test_state_rejects_negative_step(self):
        """Steps are non-negative"""
        with pytest.raises(ConfigError):
            KeypointState(np.zeros((1, 4)), -1)


class TestReverseProcess:
    """Tests for reverse steps and the refine loop"""

    def test_target_denoiser_lands_on_target(self):
        """Exact noise predictions end the chain on the clean offsets"""
        pair = noisy_pair(sigma_p=1.0)
        schedule = NoiseSchedule.linear(20)
        target = np.random.default_rng(0).normal(size=(len(pair.noisy), 4))
        refined = refine(pair.noisy, TargetDenoiser(target, 2.0), schedule, 10, cam=pair.cam)
        x1, x2 = correspondence_arrays(pair.noisy)
        r1, r2 = correspondence_arrays(refined)
        assert np.allclose(np.hstack([r1, r2]), np.hstack([x1, x2]) + 2.0 * target, atol=1e-6)

    def test_oracle_reaches_pseudo_ground_truth(self):
        """The geometric oracle ends on the epipolar projection of the input"""
        pair = noisy_pair(sigma_p=1.0)
        schedule = NoiseSchedule.linear(20)
        refined = refine(
            pair.noisy, geometric_oracle_denoiser(pair.true_pose, pair.cam), schedule, cam=pair.cam
        )
        expected = pseudo_ground_truth(pair.noisy, pair.true_pose, pair.cam)
        for got, want in zip(correspondence_arrays(refined), correspondence_arrays(expected)):
            assert np.allclose(got, want, atol=1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_oracle_halves_sampson_error(self, seed):
        """Refinement reduces the mean Sampson distance under the true pose"""
        pair = noisy_pair(sigma_p=1.0, seed=seed)
        f = fundamental_from_pose(pair.true_pose, pair.cam)
        refined = refine(
            pair.noisy,
            geometric_oracle_denoiser(pair.true_pose, pair.cam),
            NoiseSchedule.linear(20),
            cam=pair.cam,
        )
        before = sampson_residuals(f, *correspondence_arrays(pair.noisy)).mean()
        after = sampson_residuals(f, *correspondence_arrays(refined)).mean()
        assert after <= 0.5 * before

    def test_refine_preserves_order_and_confidence(self):
        """Count, order and confidences survive refinement"""
        pair = noisy_pair(sigma_p=1.0)
        refined = refine(
            pair.noisy, geometric_oracle_denoiser(pair.true_pose, pair.cam), NoiseSchedule.linear(20), cam=pair.cam
        )
        assert len(refined) == len(pair.noisy)
        assert [m.confidence for m in refined] == [m.confidence for m in pair.noisy]

    def test_start_zero_returns_input(self):
        """No reverse steps, no change"""
        pair = noisy_pair()
        oracle = geometric_oracle_denoiser(pair.true_pose, pair.cam)
        assert refine(pair.noisy, oracle, NoiseSchedule.linear(20), 0, cam=pair.cam) == list(pair.noisy)

    def test_empty_input(self):
        """Nothing to refine gives an empty list"""
        pair = noisy_pair()
        oracle = geometric_oracle_denoiser(pair.true_pose, pair.cam)
        assert refine([], oracle, NoiseSchedule.linear(20), cam=pair.cam) == []

    def test_start_past_horizon_rejected(self):
        """start_t above T is a config error"""
        pair = noisy_pair()
        oracle = geometric_oracle_denoiser(pair.true_pose, pair.cam)
        with pytest.raises(ConfigError):
            refine(pair.noisy, oracle, NoiseSchedule.linear(20), 21, cam=pair.cam)

    def test_reverse_step_at_zero_rejected(self):
        """There is no step below t = 0"""
        pair = noisy_pair()
        schedule = NoiseSchedule.linear(10)
        context = make_context(pair.noisy, pair.cam, schedule)
        state = KeypointState(np.zeros((len(pair.noisy), 4)), 0)
        with pytest.raises(ConfigError):
            reverse_step(state, TargetDenoiser(np.zeros((len(pair.noisy), 4))), schedule, 0, context)

    def test_wrong_output_shape_rejected(self):
        """A denoiser returning the wrong shape is a data error"""

        class ShortDenoiser:
            offset_scale = 1.0

            def predict(self, state, context):
                return np.zeros((state.n - 1, 4))

        pair = noisy_pair()
        schedule = NoiseSchedule.linear(10)
        context = make_context(pair.noisy, pair.cam, schedule)
        state = KeypointState(np.zeros((len(pair.noisy), 4)), 3)
        with pytest.raises(DataError):
            reverse_step(state, ShortDenoiser(), schedule, 0, context)


class TestMLPDenoiser:
    """Tests for the network forward/backward and weights file"""

    def test_backward_matches_finite_differences(self):
        """Analytic parameter gradients agree with central differences"""
        schedule = NoiseSchedule.linear(20)
        model = MLPDenoiser.initialize(0, hidden=8, data_std=0.7, schedule=schedule)
        inputs, kt, alpha_bar = _random_inputs(model, schedule)
        target = np.random.default_rng(1).normal(size=kt.shape)

        def loss(m: MLPDenoiser) -> float:
            return 0.5 * float(np.sum((m.forward(inputs, kt, alpha_bar).eps_hat - target) ** 2))

        cache = model.forward(inputs, kt, alpha_bar)
        grads = model.backward(cache, cache.eps_hat - target)
        analytic = np.concatenate([grads[name].ravel() for name in PARAMETER_ORDER])

        theta = model.parameter_vector()
        h = 1e-6
        numeric = np.empty_like(theta)
        for i in range(len(theta)):
            up, down = theta.copy(), theta.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (
                loss(model.with_parameter_vector(up)) - loss(model.with_parameter_vector(down))
            ) / (2 * h)
        assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-7)

    def test_parameter_vector_length_checked(self):
        """A vector of the wrong size cannot be loaded"""
        model = MLPDenoiser.initialize(0, hidden=4)
        with pytest.raises(DataError):
            model.with_parameter_vector(np.zeros(3))

    def test_weights_round_trip(self, tmp_path):
        """Saved and reloaded weights predict identically"""
        pair = noisy_pair()
        schedule = NoiseSchedule.linear(20)
        model = MLPDenoiser.initialize(3, hidden=8, offset_scale=1.5, data_std=0.4, schedule=schedule)
        loaded = load_denoiser(save_denoiser(model, tmp_path / "denoiser.weights"))

        assert np.array_equal(loaded.parameter_vector(), model.parameter_vector())
        context = make_context(pair.noisy, pair.cam, schedule, model.offset_scale)
        state = KeypointState(np.random.default_rng(0).normal(size=(len(pair.noisy), 4)), 7)
        assert np.array_equal(loaded.predict(state, context), model.predict(state, context))

    def test_bad_header_rejected(self, tmp_path):
        """A file without the weights header is a parse error"""
        path = tmp_path / "bad.weights"
        path.write_text("not-a-model v1 {}\n0.0\n")
        with pytest.raises(ParseError):
            load_denoiser(path)


class TestTraining:
    """Tests for the refinement loss and the training loop"""

    def test_sampson_gradient_matches_finite_differences(self):
        """d(Sampson)/d(point) agrees with central differences"""
        pair = noisy_pair()
        f = fundamental_from_pose(pair.true_pose, pair.cam).matrix
        x1, x2 = correspondence_arrays(pair.noisy[:5])
        points = np.hstack([x1, x2])
        fundamentals = np.broadcast_to(f, (len(points), 3, 3))
        _, grad = sampson_with_gradient(fundamentals, points)
        h = 1e-4
        for j in range(4):
            up, down = points.copy(), points.copy()
            up[:, j] += h
            down[:, j] -= h
            numeric = (
                sampson_with_gradient(fundamentals, up)[0] - sampson_with_gradient(fundamentals, down)[0]
            ) / (2 * h)
            assert np.allclose(grad[:, j], numeric, rtol=1e-4, atol=1e-10)

    def test_gradient_step_lowers_loss(self):
        """A small step against the gradient reduces the loss on a fixed batch"""
        schedule = NoiseSchedule.linear(20)
        data = build_training_set([noisy_pair(sigma_p=1.0)])
        batch = sample_batch(data, np.arange(data.n), schedule, np.random.default_rng(0))
        model = MLPDenoiser.initialize(
            0, hidden=8, offset_scale=data.offset_scale, data_std=data.data_std, schedule=schedule
        )
        weights = RefinementLossWeights()
        before, grads = loss_and_gradients(model, batch, weights)
        norm = np.sqrt(sum(float(np.sum(g**2)) for g in grads.values()))
        for name in PARAMETER_ORDER:
            model.params[name] = model.params[name] - 1e-4 / norm * grads[name]
        after, _ = loss_and_gradients(model, batch, weights)
        assert after.total < before.total

    def test_zero_epochs(self):
        """No epochs returns the initialized network and empty traces"""
        result = train_denoiser([noisy_pair()], NoiseSchedule.linear(10), TrainingConfig(epochs=0, hidden=8))
        assert result.loss_trace == ()
        assert result.denoiser.hidden == 8

    def test_training_deterministic(self):
        """Same seed, same weights"""
        config = TrainingConfig(epochs=2, batch_size=32, hidden=8, seed=4)
        schedule = NoiseSchedule.linear(10)
        a = train_denoiser([noisy_pair()], schedule, config)
        b = train_denoiser([noisy_pair()], schedule, config)
        assert np.array_equal(a.denoiser.parameter_vector(), b.denoiser.parameter_vector())
        assert a.loss_trace == b.loss_trace
        assert len(a.loss_trace) == 2

    def test_empty_dataset_rejected(self):
        """Training needs labeled pairs"""
        with pytest.raises(DataError):
            train_denoiser([], NoiseSchedule.linear(10))

    def test_negative_weight_rejected(self):
        """Loss weights are non-negative"""
        with pytest.raises(ConfigError):
            RefinementLossWeights(sampson=-1.0)

    @pytest.mark.slow
    def test_trained_denoiser_reduces_sampson_on_held_out_scenes(self):
        """A denoiser trained on six scenes lowers Sampson error on ten unseen ones"""
        schedule = NoiseSchedule.linear()
        training = [noisy_pair(sigma_p=1.0, seed=s) for s in range(6)]
        denoiser = train_denoiser(training, schedule, TrainingConfig()).denoiser
        ratios = []
        for seed in range(100, 110):
            pair = noisy_pair(sigma_p=1.0, seed=seed)
            f = fundamental_from_pose(pair.true_pose, pair.cam)
            x1, x2 = correspondence_arrays(pair.noisy)
            refined = refine(
                pair.noisy,
                denoiser,
                schedule,
                seed=seed,
                cam=pair.cam,
                fundamental=pixel_fundamental(x1, x2, pair.cam),
                stochastic=False,
            )
            before = sampson_residuals(f, x1, x2).mean()
            after = sampson_residuals(f, *correspondence_arrays(refined)).mean()
            ratios.append(after / before)
        assert np.mean(ratios) <= 0.95

    @pytest.mark.slow
    def test_smoothed_trace_length(self):
        """The moving average has one value per full window"""
        result = train_denoiser(
            [noisy_pair(seed=s) for s in range(3)],
            NoiseSchedule.linear(20),
            TrainingConfig(epochs=12, batch_size=64, hidden=8),
        )
        assert len(result.smoothed(5)) == 8
        assert np.all(np.isfinite(result.loss_trace))
