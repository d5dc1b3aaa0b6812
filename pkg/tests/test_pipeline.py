"""
Unit tests for pair estimation, trajectory chaining, metrics, losses and the report
"""

import json

import numpy as np
import pytest
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation as ScipyRotation

from epivo.core.errors import (
    ConfigError,
    DataError,
    MissingStageInputError,
    NoValidMatchError,
    ScaleRecoveryError,
    StageError,
)
from epivo.geometry import Pose, essential_from_pose, fundamental_from_pose, rotation_exp
from epivo.matching.types import correspondence_arrays
from epivo.pipeline.estimator import (
    Frame,
    PairTask,
    PipelineConfig,
    estimate_pair,
    estimate_sequence,
    pair_indices,
)
from epivo.pipeline.losses import LossWeights, StageInputs, stage_losses
from epivo.pipeline.metrics import absolute_metrics, relative_metrics, umeyama_alignment
from epivo.pipeline.report import build_report, config_hash, write_report
from epivo.pipeline.scale import recover_scale
from epivo.pipeline.trajectory import Trajectory, chain
from epivo.pose.types import RansacConfig
from epivo.simulation.noise import NoiseConfig
from epivo.simulation.pseudo_gt import make_labeled_pair
from tests.helpers import noisy_pair, small_scene

FAST_RANSAC = RansacConfig(iterations=200, inlier_threshold=4e-5)


def _walk(n: int = 8, seed: int = 0) -> Trajectory:
    rng = np.random.default_rng(seed)
    poses = [Pose.identity()]
    for _ in range(n - 1):
        step = Pose(rotation_exp(rng.normal(0.0, 0.02, 3)), np.array([0.0, 0.0, 1.0]) + rng.normal(0.0, 0.1, 3))
        poses.append(poses[-1].compose(step))
    return Trajectory(poses)


def _task(pair, a: int, b: int) -> PairTask:
    return PairTask(Frame(a), Frame(b), correspondences=pair.noisy, depths=pair.depths, reference=pair.true_pose)


class TestTrajectory:
    """Tests for chaining and trajectory transforms"""

    def test_chain_inverts_relatives(self):
        """Chaining the camera motions of a 100-frame walk rebuilds every pose"""
        walk = _walk(100)
        rebuilt = chain(walk.relatives())
        assert len(rebuilt) == 100
        for got, want in zip(rebuilt.poses, walk.poses):
            assert np.allclose(got.matrix(), want.matrix(), rtol=0.0, atol=1e-9)

    def test_chain_of_nothing_is_identity(self):
        """Zero motions give the anchor alone"""
        trajectory = chain([])
        assert len(trajectory) == 1
        assert np.allclose(trajectory.poses[0].matrix(), np.eye(4))

    def test_anchored_starts_at_identity(self):
        """anchored() moves the first pose to the origin"""
        walk = _walk().transformed(Pose(rotation_exp([0.0, 1.0, 0.0]), np.array([5.0, 0.0, 2.0])))
        assert np.allclose(walk.anchored().poses[0].matrix(), np.eye(4), atol=1e-12)
        assert np.allclose(walk.anchored().positions(), _walk().positions(), atol=1e-9)

    def test_rejects_empty(self):
        """A trajectory holds at least one pose"""
        with pytest.raises(DataError):
            Trajectory([])

    def test_pair_indices_stride(self):
        """Stride 2 over five frames gives two pairs"""
        assert pair_indices(5, 2) == [(0, 2), (2, 4)]
        with pytest.raises(ConfigError):
            pair_indices(5, 0)


class TestMetrics:
    """Tests for RRE/RTE and ATE/APE"""

    def test_identical_poses_have_zero_error(self):
        """Equal poses give exactly zero relative errors"""
        pose = Pose(rotation_exp([0.1, 0.2, -0.1]), np.array([0.5, 0.0, 1.0]))
        errors = relative_metrics(pose, pose)
        assert errors.rre == 0.0
        assert errors.rte == 0.0

    def test_scale_free_rescaled(self):
        """A unit-norm estimate is compared at the true translation length"""
        truth = Pose(rotation_exp([0.0, 0.1, 0.0]), np.array([0.0, 0.0, 2.0]))
        errors = relative_metrics(truth.unit(), truth)
        assert errors.rte == pytest.approx(0.0, abs=1e-12)

    def test_identical_trajectories(self):
        """ATE and APE vanish on identical inputs"""
        walk = _walk()
        errors = absolute_metrics(walk, walk)
        assert errors.ate == 0.0
        assert errors.ape == 0.0
        assert errors.ape_r == 0.0

    def test_rigid_alignment_removes_world_change(self):
        """A rigidly moved copy has zero ATE but nonzero APE"""
        walk = _walk()
        moved = walk.transformed(Pose(rotation_exp([0.0, 0.4, 0.1]), np.array([1.0, 2.0, 3.0])))
        errors = absolute_metrics(moved, walk, "rigid")
        assert errors.ate == pytest.approx(0.0, abs=1e-9)
        assert errors.ape > 1.0

    def test_similarity_alignment_removes_scale(self):
        """Sim(3) alignment absorbs a global scale"""
        walk = _walk()
        scaled = Trajectory([p.with_translation(3.0 * p.t) for p in walk.poses])
        assert absolute_metrics(scaled, walk, "similarity").ate == pytest.approx(0.0, abs=1e-9)
        assert absolute_metrics(scaled, walk, "rigid").ate > 0.1

    def test_umeyama_matches_least_squares(self):
        """The closed-form rigid fit is as good as an iterative optimum"""
        rng = np.random.default_rng(3)
        source = rng.normal(size=(30, 3))
        rotation = ScipyRotation.from_rotvec([0.3, -0.2, 0.5]).as_matrix()
        target = source @ rotation.T + np.array([1.0, -2.0, 0.5]) + rng.normal(0.0, 0.05, (30, 3))

        def residuals(x: np.ndarray) -> np.ndarray:
            r = ScipyRotation.from_rotvec(x[:3]).as_matrix()
            return (source @ r.T + x[3:] - target).ravel()

        optimum = least_squares(residuals, np.zeros(6))
        closed = umeyama_alignment(source, target)
        closed_cost = float(np.sum((closed.apply(source) - target) ** 2))
        assert closed_cost <= 2.0 * optimum.cost + 1e-9
        assert closed_cost == pytest.approx(2.0 * optimum.cost, rel=1e-6)

    def test_unknown_alignment(self):
        """Only none, rigid and similarity are accepted"""
        walk = _walk()
        with pytest.raises(ConfigError):
            absolute_metrics(walk, walk, "affine")


class TestLosses:
    """Tests for the per-stage objectives"""

    def test_f1_vanishes_on_exact_matches(self):
        """Clean correspondences have zero Sampson loss under the true F"""
        pair = noisy_pair(sigma_p=0.0)
        x1, x2 = correspondence_arrays(pair.clean)
        f = fundamental_from_pose(pair.true_pose, pair.cam).matrix
        assert stage_losses("F1", StageInputs(x1=x1, x2=x2, matrix=f)).total < 1e-18

    def test_f2_weights_components(self):
        """F2 total is the weighted component sum"""
        pair = noisy_pair(sigma_p=1.0)
        x1, x2 = correspondence_arrays(pair.noisy)
        f = fundamental_from_pose(pair.true_pose, pair.cam).matrix
        inputs = StageInputs(
            x1=x1,
            x2=x2,
            matrix=f,
            eps_hat=np.ones((4, 4)),
            eps=np.zeros((4, 4)),
            reconstructed=np.full(3, 2.0),
            target=np.zeros(3),
        )
        loss = stage_losses("F2", inputs, LossWeights(0.0, 2.0, 0.5))
        assert loss.components["ddpm"] == pytest.approx(1.0)
        assert loss.components["reconstruction"] == pytest.approx(4.0)
        assert loss.total == pytest.approx(4.0)

    def test_f3_svd_term_zero_for_essential(self):
        """A valid essential matrix has no singular-value penalty"""
        pair = noisy_pair(sigma_p=0.0)
        x1, x2 = correspondence_arrays(pair.clean)
        e = essential_from_pose(pair.true_pose).matrix
        inputs = StageInputs(
            x1=x1,
            x2=x2,
            matrix=fundamental_from_pose(pair.true_pose, pair.cam).matrix,
            hypothesis=e / np.linalg.norm(e),
            cam=pair.cam,
        )
        loss = stage_losses("F3", inputs)
        assert loss.components["svd"] == pytest.approx(0.0, abs=1e-20)
        assert loss.components["epi"] < 1e-20

    def test_missing_input(self):
        """A stage without its inputs names what is missing"""
        with pytest.raises(MissingStageInputError, match="matrix"):
            stage_losses("F1", StageInputs(x1=np.zeros((2, 2)), x2=np.zeros((2, 2))))

    def test_unknown_stage(self):
        """Only F1, F2 and F3 exist"""
        with pytest.raises(ConfigError):
            stage_losses("F4", StageInputs())

    def test_all_zero_weights_rejected(self):
        """At least one weight must be positive"""
        with pytest.raises(ConfigError):
            LossWeights(0.0, 0.0, 0.0)


class TestScale:
    """Tests for stereo scale recovery"""

    def test_recovers_metric_translation(self):
        """Exact stereo depths restore the true translation length"""
        pair = noisy_pair(sigma_p=0.0)
        scaled = recover_scale(pair.true_pose.unit(), pair.clean, pair.depths, pair.cam)
        assert not scaled.scale_free
        assert np.allclose(scaled.t, pair.true_pose.t, atol=1e-8)

    @pytest.mark.parametrize("seed", range(20))
    def test_median_tolerates_depth_outliers(self, seed):
        """A fifth of the depths inflated 2-5x leaves the scale within 2%"""
        pair = noisy_pair(sigma_p=0.0, seed=seed)
        rng = np.random.default_rng(seed)
        depths = np.asarray(pair.depths, dtype=float).copy()
        corrupted = rng.choice(len(depths), size=len(depths) // 5, replace=False)
        depths[corrupted] *= rng.uniform(2.0, 5.0, len(corrupted))
        scaled = recover_scale(pair.true_pose.unit(), pair.clean, depths, pair.cam)
        truth = np.linalg.norm(pair.true_pose.t)
        assert abs(np.linalg.norm(scaled.t) - truth) / truth <= 0.02

    def test_monocular_keeps_unit_pose(self):
        """No depths, no scale"""
        pair = noisy_pair()
        unit = pair.true_pose.unit()
        assert recover_scale(unit, pair.noisy, None, pair.cam) is unit

    def test_no_valid_depth(self):
        """All-invalid depths cannot give a scale"""
        pair = noisy_pair()
        with pytest.raises(ScaleRecoveryError):
            recover_scale(pair.true_pose.unit(), pair.noisy, np.zeros(len(pair.noisy)), pair.cam)


class TestEstimatePair:
    """Tests for single-pair estimation"""

    @pytest.mark.parametrize("solver", ["ransac", "weighted-svd", "multi"])
    def test_noise_free_pair_recovers_pose(self, solver):
        """Every solver returns the true metric pose on exact matches"""
        pair = noisy_pair(sigma_p=0.0)
        config = PipelineConfig(solver=solver, ransac=FAST_RANSAC)
        estimate = estimate_pair(
            Frame(0), Frame(1), config, cam=pair.cam, correspondences=pair.noisy, depths=pair.depths
        )
        errors = relative_metrics(estimate.pose, pair.true_pose)
        assert errors.rre < 1e-5
        assert errors.rte < 1e-5
        assert estimate.diagnostics.scale is not None

    def test_monocular_pose_is_scale_free(self):
        """Without depths the translation stays unit norm"""
        pair = noisy_pair(sigma_p=0.0)
        config = PipelineConfig(solver="ransac", ransac=FAST_RANSAC)
        estimate = estimate_pair(Frame(0), Frame(1), config, cam=pair.cam, correspondences=pair.noisy)
        assert estimate.pose.scale_free
        assert np.linalg.norm(estimate.pose.t) == pytest.approx(1.0)

    def test_refinement_without_denoiser(self):
        """Refinement needs a denoiser; the failure names the stage"""
        pair = noisy_pair()
        config = PipelineConfig(refinement=True, ransac=FAST_RANSAC)
        with pytest.raises(StageError) as info:
            estimate_pair(Frame(0), Frame(1), config, cam=pair.cam, correspondences=pair.noisy)
        assert info.value.stage == "refine"
        assert isinstance(info.value.cause, ConfigError)

    def test_too_few_matches(self):
        """Fewer than min_matches fails in the matcher stage"""
        pair = noisy_pair()
        with pytest.raises(StageError) as info:
            estimate_pair(Frame(0), Frame(1), PipelineConfig(), cam=pair.cam, correspondences=pair.noisy[:4])
        assert isinstance(info.value.cause, NoValidMatchError)


class TestEstimateSequence:
    """Tests for sequence estimation and constant-velocity fallback"""

    def test_failed_pair_reuses_previous_pose(self):
        """A pair without enough matches takes its predecessor's pose"""
        scene = small_scene(0)
        pairs = [make_labeled_pair(scene, k, k + 1, NoiseConfig(sigma_p=0.0), k) for k in range(3)]
        tasks = [_task(p, k, k + 1) for k, p in enumerate(pairs)]
        tasks[2] = PairTask(Frame(2), Frame(3), correspondences=pairs[2].noisy[:4])
        result = estimate_sequence(tasks, PipelineConfig(solver="multi", ransac=FAST_RANSAC), cam=scene.cam)
        assert result.fallback_flags == [False, False, True]
        assert list(result.failures) == [2]
        assert result.failures[2].frame == 2
        assert np.array_equal(result.relatives[2].matrix(), result.relatives[1].matrix())

    def test_first_pair_falls_back_to_identity(self):
        """With no predecessor the fallback is the identity"""
        pair = noisy_pair()
        tasks = [PairTask(Frame(0), Frame(1), correspondences=pair.noisy[:3])]
        result = estimate_sequence(tasks, PipelineConfig(ransac=FAST_RANSAC), cam=pair.cam)
        assert np.allclose(result.relatives[0].matrix(), np.eye(4))

    def test_config_error_aborts(self):
        """A configuration failure is not papered over"""
        pair = noisy_pair()
        config = PipelineConfig(refinement=True, ransac=FAST_RANSAC)
        with pytest.raises(StageError):
            estimate_sequence([_task(pair, 0, 1)], config, cam=pair.cam)

    def test_threads_match_serial(self):
        """A worker pool gives the same poses as one worker"""
        scene = small_scene(0)
        tasks = [
            _task(make_labeled_pair(scene, k, k + 1, NoiseConfig(sigma_p=1.0), k), k, k + 1) for k in range(4)
        ]
        config = PipelineConfig(solver="multi", ransac=FAST_RANSAC)
        serial = estimate_sequence(tasks, config, cam=scene.cam)
        pooled = estimate_sequence(tasks, config, cam=scene.cam, workers=3)
        for a, b in zip(serial.relatives, pooled.relatives):
            assert np.array_equal(a.matrix(), b.matrix())


class TestReport:
    """Tests for the metrics report and its files"""

    def _report(self):
        scene = small_scene(0)
        pairs = [make_labeled_pair(scene, k, k + 1, NoiseConfig(sigma_p=0.5), k) for k in range(3)]
        tasks = [_task(p, k, k + 1) for k, p in enumerate(pairs)]
        result = estimate_sequence(tasks, PipelineConfig(solver="multi", ransac=FAST_RANSAC), cam=scene.cam)
        estimated = chain(result.camera_motions())
        truth = Trajectory.from_world_to_camera(scene.trajectory[:4]).anchored()
        return build_report(
            result, estimated, truth=truth, truth_relatives=[p.true_pose for p in pairs]
        )

    def test_report_has_errors(self):
        """Ground truth fills every sequence metric"""
        report = self._report()
        assert report.frames == 4
        assert report.pairs == 3
        assert report.scale_mode == "stereo"
        assert report.rre is not None and report.rre < 1.0
        assert report.ate is not None
        assert report.per_frame[-1].cum_ate_m == pytest.approx(report.ate)

    def test_files_are_deterministic(self, tmp_path):
        """Writing the same report twice gives identical bytes"""
        first = write_report(self._report(), tmp_path / "a")
        second = write_report(self._report(), tmp_path / "b")
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()
        metrics = json.loads((tmp_path / "a" / "metrics.json").read_text())
        assert metrics["pairs"] == 3

    def test_config_hash_ignores_key_order(self):
        """The hash is over canonical JSON"""
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
