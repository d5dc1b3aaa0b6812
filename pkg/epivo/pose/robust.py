"""Hypothesize-and-verify essential-matrix estimation with a Sampson inlier test."""

from __future__ import annotations

import numpy as np

from epivo.core.errors import DataError, DegenerateConfigurationError, RobustFailureError
from epivo.core.logger import logger
from epivo.geometry.epipolar import sampson_residuals
from epivo.pose.five_point import five_point
from epivo.pose.solvers import FULL_RANK_POINTS, eight_point
from epivo.pose.types import EssentialHypothesis, RansacConfig


def _minimal_models(x1: np.ndarray, x2: np.ndarray, sample_size: int) -> list[EssentialHypothesis]:
    try:
        if sample_size == 5:
            return five_point(x1, x2)
        return [eight_point(x1, x2)]
    except DegenerateConfigurationError:
        return []


def ransac_estimate(
    x1: np.ndarray, x2: np.ndarray, cfg: RansacConfig = RansacConfig()
) -> EssentialHypothesis:
    """Best-support model over ``cfg.iterations`` seeded samples, refit on its inliers.

    Iteration i draws its sample from ``default_rng([cfg.seed, i])`` so the
    result for a prefix of iterations does not depend on the total count.
    """
    x1 = np.asarray(x1, dtype=np.float64).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=np.float64).reshape(-1, 2)
    n = len(x1)
    if n != len(x2):
        raise DataError(f"Point sets differ in length: {n} vs {len(x2)}")
    if n < cfg.sample_size:
        raise RobustFailureError(
            f"RANSAC needs at least {cfg.sample_size} correspondences, got {n}"
        )

    best_inliers = np.zeros(n, dtype=bool)
    best_count, best_score = -1, np.inf
    best_model: EssentialHypothesis | None = None
    for i in range(cfg.iterations):
        rng = np.random.default_rng([cfg.seed, i])
        sample = rng.choice(n, size=cfg.sample_size, replace=False)
        for model in _minimal_models(x1[sample], x2[sample], cfg.sample_size):
            residuals = sampson_residuals(model.e, x1, x2)
            inliers = (residuals.values < cfg.inlier_threshold) & ~residuals.degenerate
            count = int(inliers.sum())
            score = float(residuals.values[inliers].mean()) if count else np.inf
            if count > best_count or (count == best_count and score < best_score):
                best_inliers, best_count, best_score, best_model = inliers, count, score, model
        if cfg.stop_at_goal and best_count == n:
            logger.debug(f"RANSAC: full support after {i + 1} iteration(s)")
            break

    if best_model is None or best_count < cfg.sample_size:
        raise RobustFailureError(
            f"No hypothesis reached {cfg.sample_size} inliers in {cfg.iterations} iteration(s)"
        )

    model = best_model
    if best_count >= FULL_RANK_POINTS:
        try:
            model = eight_point(x1[best_inliers], x2[best_inliers])
        except DegenerateConfigurationError as e:
            logger.warning(f"RANSAC refit failed ({e}); keeping the minimal-sample model")
    score = sampson_residuals(model.e, x1[best_inliers], x2[best_inliers]).mean()
    logger.debug(f"RANSAC: {best_count}/{n} inliers, refit Sampson {score:.3e}")
    return EssentialHypothesis(
        e=model.e,
        sampson_score=score,
        solver_tag=model.solver_tag,
        inliers=best_inliers,
    )
