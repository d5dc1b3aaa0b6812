"""
Unit tests for the sparse matcher
"""

import numpy as np
import pytest

from epivo.core.errors import ConfigError, DataError, NoValidMatchError
from epivo.geometry.types import PixelPoint
from epivo.matching import (
    DescriptorSet,
    extract_patch,
    grid_indices,
    match_descriptors,
    patch_cosine_topk,
    score_matrix,
    sinkhorn,
    sinusoidal_encoding,
    threshold_matches,
)


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    d = rng.normal(size=(n, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _descriptor_set(descriptors: np.ndarray) -> DescriptorSet:
    n = len(descriptors)
    return DescriptorSet(descriptors, np.column_stack([np.arange(n) * 10.0, np.arange(n) * 5.0]))


class TestSinkhorn:
    """Tests for log-domain Sinkhorn normalization"""

    @pytest.mark.slow
    def test_doubly_stochastic(self):
        """Random 10x10 scores converge to unit row and column sums"""
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = sinkhorn(rng.normal(size=(10, 10)), iterations=100, temperature=1.0)
            assert np.allclose(p.probabilities.sum(axis=0), 1.0, atol=1e-6)
            assert np.allclose(p.probabilities.sum(axis=1), 1.0, atol=1e-6)

    def test_shift_invariant(self):
        """Adding a constant to every score leaves the output unchanged"""
        scores = np.random.default_rng(1).normal(size=(10, 10))
        a = sinkhorn(scores, iterations=100, temperature=1.0)
        b = sinkhorn(scores + 3.7, iterations=100, temperature=1.0)
        assert np.allclose(a.probabilities, b.probabilities, atol=1e-6)

    def test_rectangular_marginals(self):
        """The smaller side sums to one, the larger to n_small / n_large"""
        p = sinkhorn(np.random.default_rng(2).normal(size=(4, 8)), iterations=200, temperature=1.0)
        assert np.allclose(p.probabilities.sum(axis=1), 1.0, atol=1e-6)
        assert np.allclose(p.probabilities.sum(axis=0), 0.5, atol=1e-6)

    def test_residual_trace_decreases(self):
        """The marginal residual after the last iteration is below the first"""
        p = sinkhorn(np.random.default_rng(3).normal(size=(6, 6)), iterations=30, temperature=1.0)
        assert len(p.residual_trace) == 30
        assert p.residual_trace[-1] <= p.residual_trace[0]

    def test_rejects_nan(self):
        """NaN scores are a data error"""
        scores = np.zeros((3, 3))
        scores[1, 1] = np.nan
        with pytest.raises(DataError):
            sinkhorn(scores)

    def test_rejects_all_neg_inf_row(self):
        """A row with no finite score cannot be matched"""
        scores = np.zeros((3, 3))
        scores[0] = -np.inf
        with pytest.raises(NoValidMatchError):
            sinkhorn(scores)

    def test_rejects_bad_temperature(self):
        """Temperature must be positive"""
        with pytest.raises(ConfigError):
            sinkhorn(np.zeros((2, 2)), temperature=0.0)


class TestThreshold:
    """Tests for confidence thresholding with mutual-best filtering"""

    def test_identity_matrix_matches_diagonal(self):
        """A permutation-like matrix keeps every diagonal pair"""
        rng = np.random.default_rng(4)
        a = _descriptor_set(_unit_rows(rng, 5, 16))
        p = sinkhorn(score_matrix(a, a), iterations=50, temperature=0.05)
        matches = threshold_matches(p, 0.5, a, a)
        assert [(m.index_a, m.index_b) for m in matches] == [(i, i) for i in range(5)]

    def test_tau_out_of_range(self):
        """tau must lie in (0, 1]"""
        a = _descriptor_set(np.eye(3))
        p = sinkhorn(score_matrix(a, a))
        with pytest.raises(ConfigError):
            threshold_matches(p, 0.0, a, a)

    def test_dimension_mismatch(self):
        """Descriptors of different width cannot be scored"""
        with pytest.raises(DataError):
            score_matrix(_descriptor_set(np.eye(3)), _descriptor_set(np.eye(4)[:3]))


class TestMatchDescriptors:
    """Tests for the full score / Sinkhorn / threshold path"""

    def test_recovers_permutation(self):
        """Shuffled copies of the same descriptors are matched back"""
        rng = np.random.default_rng(5)
        base = _unit_rows(rng, 20, 128)
        perm = rng.permutation(20)
        a = _descriptor_set(base)
        b = DescriptorSet(base[perm], a.locations[perm])
        matches = match_descriptors(a, b, tau=0.65, temperature=0.1, iterations=50)
        assert len(matches) == 20
        for m in matches:
            assert perm[m.index_b] == m.index_a
            assert m.x1 == m.x2

    def test_top_k_limits_output(self):
        """Re-ranking keeps at most k matches"""
        rng = np.random.default_rng(6)
        base = _unit_rows(rng, 12, 64)
        a = _descriptor_set(base)
        matches = match_descriptors(a, a, temperature=0.1, top_k=5)
        assert len(matches) == 5
        assert all(m.similarity == pytest.approx(1.0) for m in matches)


class TestPatches:
    """Tests for patch top-K and positional encoding helpers"""

    def test_zero_patch_excluded(self, caplog):
        """Zero-norm patches are skipped with a warning"""
        patches = [np.zeros(4), np.ones(4)]
        locations = [PixelPoint(0.0, 0.0), PixelPoint(1.0, 1.0)]
        with caplog.at_level("WARNING", logger="epivo"):
            kept = patch_cosine_topk(
                patches, patches, [(0, 0), (1, 1)], 2, locations_a=locations, locations_b=locations
            )
        assert len(kept) == 1
        assert kept[0].index_a == 1
        assert "zero-norm" in caplog.text

    def test_stable_order_on_ties(self):
        """Equal similarities keep candidate order"""
        patches = [np.ones(3)] * 3
        locations = [PixelPoint(float(i), 0.0) for i in range(3)]
        kept = patch_cosine_topk(
            patches, patches, [(2, 2), (0, 0), (1, 1)], 2, locations_a=locations, locations_b=locations
        )
        assert [m.index_a for m in kept] == [2, 0]

    def test_extract_patch_zero_pads(self):
        """A corner patch is padded with zeros outside the image"""
        image = np.arange(16, dtype=float).reshape(4, 4) + 1.0
        patch = extract_patch(image, PixelPoint(0.0, 0.0), 1).reshape(3, 3)
        assert patch[0].tolist() == [0.0, 0.0, 0.0]
        assert patch[1, 1] == 1.0

    def test_grid_indices_clip(self):
        """Locations on the far edge land in the last cell"""
        cells = grid_indices(np.array([[640.0, 480.0], [0.0, 0.0]]), (640, 480), (4, 8))
        assert cells.tolist() == [[3, 7], [0, 0]]

    def test_encoding_dimension(self):
        """The encoding must split evenly across sin/cos of two axes"""
        assert sinusoidal_encoding(np.array([[1, 2]]), 8).shape == (1, 8)
        with pytest.raises(ConfigError):
            sinusoidal_encoding(np.array([[1, 2]]), 6)
