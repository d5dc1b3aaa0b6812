"""
Unit tests for the dataset readers and writers
"""

import dataclasses
import json

import numpy as np
import pytest

from epivo.core.errors import ConfigError, DataError, ParseError, PoseDataError
from epivo.datasets.dumps import load_graph, load_hypotheses, write_graph, write_hypotheses
from epivo.datasets.fixture import (
    labeled_pairs,
    load_fixture,
    pair_file,
    pair_stem,
    verify_clean_pairs,
    write_fixture,
)
from epivo.datasets.pairs import (
    DisparityGrid,
    load_camera,
    load_correspondences,
    load_descriptors,
    load_disparity_grid,
    write_camera,
    write_correspondences,
    write_descriptors,
    write_disparity_grid,
)
from epivo.datasets.poses import load_poses, write_poses
from epivo.datasets.records import parse_floats, read_counted_rows, read_records
from epivo.geometry import Pose, essential_from_pose, rotation_exp
from epivo.geometry.epipolar import fundamental_from_pose, sampson_residuals
from epivo.geometry.types import PixelPoint
from epivo.graph.builder import build_graph
from epivo.matching.types import Correspondence, DescriptorSet, correspondence_arrays
from epivo.pipeline.trajectory import Trajectory
from epivo.pose.types import EssentialHypothesis, SolverTag
from epivo.simulation.noise import NoiseConfig
from epivo.simulation.pseudo_gt import observe_pair
from epivo.simulation.scene import default_camera
from tests.helpers import correspondences_from_points, random_points, small_scene

POSES = [
    Pose(rotation_exp([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]),
    Pose(rotation_exp([0.01, -0.02, 0.03]), [0.1, -0.2, 1.5]),
    Pose(rotation_exp([-0.3, 0.1, 0.2]), [1.25, 0.5, 3.0]),
]


def _write_fixture(root, fmt="kitti", n_frames=3, sigma_p=0.5):
    scene = small_scene(0, n_frames=n_frames)
    noise = NoiseConfig(sigma_p=sigma_p)
    observations = [observe_pair(scene, k, k + 1, noise, 0) for k in range(n_frames - 1)]
    write_fixture(root, scene, observations, seed=0, pose_format=fmt)
    return scene


class TestRecords:
    """Tests for the shared text record reader"""

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        """Line numbers count every physical line"""
        path = tmp_path / "rows.txt"
        path.write_text("# header\n\n1 2 3\n  \n4 5 6\n")
        records = read_records(path)
        assert [r.line_number for r in records] == [3, 5]
        assert records[1].fields == ["4", "5", "6"]

    def test_missing_file(self, tmp_path):
        """A missing file is a data error"""
        with pytest.raises(DataError, match="not found"):
            read_records(tmp_path / "absent.txt")

    def test_column_count_reports_line(self, tmp_path):
        """A short row names its line"""
        path = tmp_path / "rows.txt"
        path.write_text("1 2 3\n4 5\n")
        record = read_records(path)[1]
        with pytest.raises(ParseError) as excinfo:
            parse_floats(path, record, 3)
        assert excinfo.value.line_number == 2
        assert f"{path}:2:" in str(excinfo.value)

    def test_non_numeric_and_non_finite(self, tmp_path):
        """Text and NaN values are rejected"""
        path = tmp_path / "rows.txt"
        path.write_text("1 x 3\n1 nan 3\n")
        first, second = read_records(path)
        with pytest.raises(ParseError, match="not a number"):
            parse_floats(path, first)
        with pytest.raises(ParseError, match="non-finite"):
            parse_floats(path, second)

    def test_counted_rows_mismatch(self, tmp_path):
        """The count header must match the row count"""
        path = tmp_path / "rows.txt"
        path.write_text("3\n1 2\n3 4\n")
        with pytest.raises(ParseError, match="announces 3"):
            read_counted_rows(path, 2)

    def test_counted_rows_empty(self, tmp_path):
        """A zero count gives an empty table"""
        path = tmp_path / "rows.txt"
        path.write_text("0\n")
        assert read_counted_rows(path, 2).shape == (0, 2)


class TestPoses:
    """Tests for KITTI and TartanAir pose files"""

    def test_kitti_round_trip_is_exact(self, tmp_path):
        """17 significant digits reproduce every entry"""
        path = write_poses(tmp_path / "poses.txt", Trajectory(POSES), "kitti")
        loaded = load_poses(path, "kitti")
        assert len(loaded) == 3
        for original, read in zip(POSES, loaded.poses):
            assert np.array_equal(original.matrix(), read.matrix())

    def test_tartanair_round_trip(self, tmp_path):
        """Quaternion rows reproduce the poses"""
        path = write_poses(tmp_path / "poses.txt", Trajectory(POSES), "tartanair")
        assert len(path.read_text().splitlines()[0].split()) == 7
        loaded = load_poses(path, "tartanair")
        for original, read in zip(POSES, loaded.poses):
            assert np.allclose(original.matrix(), read.matrix(), atol=1e-12)

    def test_wrong_column_count(self, tmp_path):
        """A TartanAir row in a KITTI file names its line"""
        path = tmp_path / "poses.txt"
        path.write_text("# comment\n0 0 0 0 0 0 1\n")
        with pytest.raises(ParseError) as excinfo:
            load_poses(path, "kitti")
        assert excinfo.value.line_number == 2

    def test_non_orthonormal_rotation_rejected(self, tmp_path):
        """A scaled rotation block is refused with its line"""
        path = tmp_path / "poses.txt"
        path.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n1.1 0 0 0 0 1 0 0 0 0 1 0\n")
        with pytest.raises(PoseDataError, match=":2:"):
            load_poses(path, "kitti")

    def test_reflection_rejected(self, tmp_path):
        """A negative determinant is refused"""
        path = tmp_path / "poses.txt"
        path.write_text("-1 0 0 0 0 1 0 0 0 0 1 0\n")
        with pytest.raises(PoseDataError, match="determinant"):
            load_poses(path, "kitti")

    def test_small_deviation_repaired(self, tmp_path, caplog):
        """Slightly skewed rotations are projected back with a warning"""
        path = tmp_path / "poses.txt"
        path.write_text("1.00001 0 0 0 0 1 0 0 0 0 1 0\n")
        with caplog.at_level("WARNING", logger="epivo"):
            trajectory = load_poses(path, "kitti")
        rotation = trajectory.poses[0].R
        assert np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-12)
        assert "re-orthonormalized" in caplog.text

    def test_bad_quaternion_norm(self, tmp_path):
        """TartanAir quaternions must be unit"""
        path = tmp_path / "poses.txt"
        path.write_text("0 0 0 0 0 0 2\n")
        with pytest.raises(PoseDataError, match="quaternion norm"):
            load_poses(path, "tartanair")

    def test_unknown_format(self, tmp_path):
        """Only kitti and tartanair are known"""
        with pytest.raises(ConfigError):
            write_poses(tmp_path / "poses.txt", Trajectory(POSES), "euroc")

    def test_empty_file(self, tmp_path):
        """A file without poses is malformed"""
        path = tmp_path / "poses.txt"
        path.write_text("# nothing\n")
        with pytest.raises(ParseError, match="no poses"):
            load_poses(path)


class TestPairFiles:
    """Tests for correspondence, descriptor, grid and camera files"""

    def test_correspondence_round_trip(self, tmp_path):
        """Endpoints and metadata survive a write and read"""
        matches = [
            Correspondence(PixelPoint(10.5, 20.25), PixelPoint(11.0, 19.75), 0.9, 0.1),
            Correspondence(PixelPoint(300.0, 40.0), PixelPoint(302.5, 41.0), 0.4, 0.3),
        ]
        path = write_correspondences(tmp_path / "pair.corr", matches)
        assert path.read_text().splitlines()[0] == "2"
        assert load_correspondences(path) == matches

    def test_invalid_confidence_reports_line(self, tmp_path):
        """A confidence above one is a parse error on its row"""
        path = tmp_path / "pair.corr"
        path.write_text("2\n1 2 3 4 0.5 0\n1 2 3 4 1.5 0\n")
        with pytest.raises(ParseError) as excinfo:
            load_correspondences(path)
        assert excinfo.value.line_number == 3

    def test_descriptor_round_trip(self, tmp_path):
        """Descriptors and locations are stored in order"""
        rng = np.random.default_rng(0)
        descriptors = DescriptorSet(rng.normal(size=(4, 8)), rng.uniform(0, 100, (4, 2)))
        loaded = load_descriptors(write_descriptors(tmp_path / "a.desc", descriptors))
        assert np.array_equal(loaded.descriptors, descriptors.descriptors)
        assert np.array_equal(loaded.locations, descriptors.locations)

    def test_descriptor_row_count(self, tmp_path):
        """n descriptors need n location rows"""
        path = tmp_path / "a.desc"
        path.write_text("2 3\n1 2 3\n4 5 6\n7 8\n")
        with pytest.raises(ParseError, match="expected 4"):
            load_descriptors(path)

    def test_grid_bilinear_sampling(self):
        """A planar grid is reproduced exactly between cells"""
        rows, cols = np.mgrid[0:4, 0:5]
        grid = DisparityGrid(2.0 * cols + 3.0 * rows + 1.0)
        sampled = grid.sample(np.array([[1.0, 2.0], [1.5, 2.25]]))
        assert sampled == pytest.approx([9.0, 10.75])

    def test_grid_outside_is_nan(self, caplog):
        """Pixels outside the grid give NaN and a warning"""
        grid = DisparityGrid(np.ones((3, 3)))
        with caplog.at_level("WARNING", logger="epivo"):
            sampled = grid.sample(np.array([[10.0, 0.0], [1.0, 1.0]]))
        assert np.isnan(sampled[0])
        assert sampled[1] == pytest.approx(1.0)
        assert "outside the grid" in caplog.text

    def test_grid_needs_two_dimensions(self):
        """A single row cannot be interpolated"""
        with pytest.raises(DataError):
            DisparityGrid(np.ones((1, 5)))

    def test_grid_round_trip(self, tmp_path):
        """Grid files keep shape and values"""
        grid = DisparityGrid(np.arange(12, dtype=float).reshape(3, 4) / 7.0)
        loaded = load_disparity_grid(write_disparity_grid(tmp_path / "f.grid", grid))
        assert loaded.shape == (3, 4)
        assert np.array_equal(loaded.values, grid.values)

    def test_camera_round_trip(self, tmp_path):
        """camera.json reproduces the calibration"""
        cam = default_camera()
        assert load_camera(write_camera(tmp_path / "camera.json", cam)) == cam

    def test_camera_invalid_json(self, tmp_path):
        """Malformed JSON reports its line"""
        path = tmp_path / "camera.json"
        path.write_text('{\n  "fx": 500,\n  "fy":\n}\n')
        with pytest.raises(ParseError) as excinfo:
            load_camera(path)
        assert excinfo.value.line_number == 4

    def test_camera_missing_field(self, tmp_path):
        """A camera without fx is rejected"""
        path = tmp_path / "camera.json"
        path.write_text(json.dumps({"fy": 500, "cx": 320, "cy": 240, "baseline": 0.5}))
        with pytest.raises(DataError, match="invalid camera"):
            load_camera(path)


class TestDumps:
    """Tests for hypothesis and graph dumps"""

    def test_hypotheses_round_trip(self, tmp_path):
        """Matrix, score and tag per line"""
        pose = Pose(rotation_exp([0.0, 0.05, 0.0]), [0.6, 0.0, 0.8])
        hypotheses = [
            EssentialHypothesis(essential_from_pose(pose), 0.25, SolverTag.EIGHT_POINT),
            EssentialHypothesis(essential_from_pose(pose), 1.5, SolverTag.WEIGHTED_SVD),
        ]
        rows = load_hypotheses(write_hypotheses(tmp_path / "pair.hyp", hypotheses))
        assert [row.tag for row in rows] == ["eight_point", "weighted_svd"]
        assert [row.score for row in rows] == [0.25, 1.5]
        assert np.array_equal(rows[0].matrix, hypotheses[0].matrix)

    def test_hypotheses_field_count(self, tmp_path):
        """Each line carries eleven fields"""
        path = tmp_path / "pair.hyp"
        path.write_text("1 0 0 0 1 0 0 0 1 eight_point\n")
        with pytest.raises(ParseError, match="11 fields"):
            load_hypotheses(path)

    def test_graph_round_trip(self, tmp_path):
        """Nodes, weights and tagged edges survive"""
        cam = default_camera()
        points = random_points(np.random.default_rng(4), 12)
        pose = Pose(rotation_exp([0.0, 0.02, 0.0]), [0.1, 0.0, 1.0])
        graph = build_graph(correspondences_from_points(points, pose, cam), points[:, 2], cam)
        dump = load_graph(write_graph(tmp_path / "pair.graph", graph))
        assert np.array_equal(dump.points, graph.points)
        assert np.array_equal(dump.weights, graph.weights)
        assert dump.edges == graph.edge_list()

    def test_graph_unknown_tag(self, tmp_path):
        """Edge tags are a closed set"""
        path = tmp_path / "pair.graph"
        path.write_text("# nodes\n0 0 0 1 1\n1 0 0 2 1\n# edges\n0 1 spanning\n")
        with pytest.raises(ParseError) as excinfo:
            load_graph(path)
        assert excinfo.value.line_number == 5


class TestFixture:
    """Tests for sequence directories"""

    def test_layout_and_reload(self, tmp_path):
        """Written sequences load back with every pair"""
        scene = _write_fixture(tmp_path)
        assert pair_stem(0, 1) == "000000_000001"
        assert pair_file(tmp_path, 0, 1, ".corr").is_file()

        fixture = load_fixture(tmp_path)
        assert fixture.n_frames == 3
        assert [(p.frame_a, p.frame_b) for p in fixture.pairs] == [(0, 1), (1, 2)]
        assert fixture.manifest["seed"] == 0
        pair = fixture.pairs[0]
        assert pair.clean is not None and pair.descriptors_b is not None
        assert len(pair.depths) == len(pair.correspondences)
        assert np.allclose(
            fixture.true_relative(1, 2).matrix(), scene.relative_pose(1, 2).matrix(), atol=1e-9
        )

    def test_tartanair_layout(self, tmp_path):
        """The manifest pose format is used when loading"""
        scene = _write_fixture(tmp_path, fmt="tartanair")
        fixture = load_fixture(tmp_path)
        assert fixture.manifest["pose_format"] == "tartanair"
        assert np.allclose(
            fixture.true_relative(0, 1).matrix(), scene.relative_pose(0, 1).matrix(), atol=1e-9
        )

    def test_clean_pairs_are_epipolar_exact(self, tmp_path):
        """Noise-free correspondences satisfy the stored ground truth"""
        _write_fixture(tmp_path)
        assert verify_clean_pairs(load_fixture(tmp_path)) <= 1e-10

    def test_noisy_pairs_fail_verification(self, tmp_path):
        """Substituting noisy matches for clean ones is detected"""
        _write_fixture(tmp_path)
        fixture = load_fixture(tmp_path)
        tampered = dataclasses.replace(
            fixture,
            pairs=[dataclasses.replace(p, clean=p.correspondences) for p in fixture.pairs],
        )
        with pytest.raises(DataError, match="epipolar-consistent"):
            verify_clean_pairs(tampered)

    def test_missing_manifest(self, tmp_path):
        """A directory without manifest.json is not a sequence"""
        with pytest.raises(DataError, match="manifest"):
            load_fixture(tmp_path)

    def test_missing_pair_file(self, tmp_path):
        """A listed pair needs its correspondences"""
        _write_fixture(tmp_path)
        pair_file(tmp_path, 1, 2, ".corr").unlink()
        with pytest.raises(DataError, match=r"pair \(1, 2\)"):
            load_fixture(tmp_path)

    def test_frame_grid_optional(self, tmp_path):
        """Dense grids are read when present"""
        _write_fixture(tmp_path)
        fixture = load_fixture(tmp_path)
        assert fixture.frame_grid(0) is None
        (tmp_path / "frames").mkdir()
        write_disparity_grid(tmp_path / "frames" / "000000.grid", DisparityGrid(np.ones((4, 4))))
        assert fixture.frame_grid(0).shape == (4, 4)

    def test_labeled_pairs_use_pseudo_ground_truth(self, tmp_path):
        """Supervision targets lie on the true epipolar lines"""
        _write_fixture(tmp_path)
        fixture = load_fixture(tmp_path)
        pairs = labeled_pairs(fixture)
        assert len(pairs) == 2
        first = pairs[0]
        x1, x2 = correspondence_arrays(first.pseudo_gt)
        f = fundamental_from_pose(first.true_pose, fixture.cam)
        assert sampson_residuals(f, x1, x2).values.max() < 1e-8
        assert first.clean == fixture.pairs[0].clean
