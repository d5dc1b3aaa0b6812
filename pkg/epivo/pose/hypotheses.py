"""
Multiple weighted essential-matrix hypotheses from one scored graph.

Hypotheses differ by weight temperature: variant k uses wᵢ^(1/Tₖ) with Tₖ
log-spaced in [0.5, 2] (T < 1 sharpens the node weights, T > 1 flattens them).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from epivo.core.errors import ConfigError, NoValidPoseError, PipelineError
from epivo.core.logger import logger
from epivo.geometry.epipolar import sampson_residuals
from epivo.graph.builder import CorrespondenceGraph
from epivo.pose.solvers import DesignMatrix, weighted_svd_solve
from epivo.pose.types import EssentialHypothesis
from epivo.settings import solver_defaults


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    hypotheses: list[EssentialHypothesis]
    temperatures: tuple[float, ...]
    scores: tuple[float, ...]
    selected: int

    @property
    def best(self) -> EssentialHypothesis:
        return self.hypotheses[self.selected]


def hypothesis_temperatures(m: int) -> np.ndarray:
    if m < 1:
        raise ConfigError(f"Need at least one hypothesis, got m={m}")
    if m == 1:
        return np.ones(1)
    return np.geomspace(solver_defaults.TEMPERATURE_MIN, solver_defaults.TEMPERATURE_MAX, m)


def multi_hypothesis(
    graph: CorrespondenceGraph, m: int = solver_defaults.HYPOTHESES
) -> HypothesisSet:
    """Solve once per temperature; select the lowest weighted mean Sampson (raw weights)."""
    temperatures = hypothesis_temperatures(m)
    x1, x2 = graph.normalized_points()
    design = DesignMatrix.from_points(x1, x2)
    raw = graph.weights

    hypotheses: list[EssentialHypothesis] = []
    used: list[float] = []
    scores: list[float] = []
    for temperature in temperatures:
        variant = np.power(raw, 1.0 / temperature)
        try:
            solution = weighted_svd_solve(design, variant, x1=x1, x2=x2, with_gradient=False)
        except PipelineError as e:
            logger.warning(f"Hypothesis at temperature {temperature:.3f} failed: {e}")
            continue
        hypothesis = solution.hypothesis
        hypotheses.append(hypothesis)
        used.append(float(temperature))
        scores.append(sampson_residuals(hypothesis.e, x1, x2).weighted_mean(raw))

    if not hypotheses:
        raise NoValidPoseError(f"All {m} weighted hypotheses failed")
    selected = int(np.argmin(scores))
    logger.debug(f"Multi-hypothesis: {len(hypotheses)} solved, selected T={used[selected]:.3f}")
    return HypothesisSet(
        hypotheses=hypotheses, temperatures=tuple(used), scores=tuple(scores), selected=selected
    )
