"""
Per-pair relative pose estimation and sequence-level orchestration.

Stages, in order: matcher → refine (optional) → init (RANSAC or eight-point)
→ graph (lift + MST ∪ KNN + node scores) → solver → chirality → scale.
Any failure is re-raised as a ``StageError`` naming the stage that failed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Literal, NamedTuple, Optional, Sequence

import numpy as np

from epivo.core.errors import (
    ConfigError,
    DataError,
    EpivoError,
    NoValidMatchError,
    PipelineError,
    StageError,
)
from epivo.core.logger import logger
from epivo.diffusion.process import Denoiser, refine
from epivo.diffusion.schedule import NoiseSchedule
from epivo.geometry.epipolar import essential_from_pose, sampson_residuals
from epivo.geometry.types import CameraModel, Pose
from epivo.graph.builder import CorrespondenceGraph, LiftMode, build_graph
from epivo.graph.scoring import score_nodes
from epivo.matching.matcher import match_descriptors
from epivo.matching.types import Correspondence, DescriptorSet, correspondence_arrays
from epivo.pipeline.scale import recover_scale
from epivo.pose.decomposition import TriangulationMethod, decompose, rank_candidates
from epivo.pose.hypotheses import multi_hypothesis
from epivo.pose.robust import ransac_estimate
from epivo.pose.solvers import DesignMatrix, eight_point, pixel_fundamental, weighted_svd_solve
from epivo.pose.types import EssentialHypothesis, RansacConfig
from epivo.settings import graph_defaults, matcher_defaults, solver_defaults
from epivo.simulation.scene import depth_from_disparity

SolverChoice = Literal["ransac", "weighted-svd", "multi"]
ScorerChoice = Literal["residual", "mp"]
InitChoice = Literal["ransac", "eight-point"]

SOLVERS: tuple[str, ...] = ("ransac", "weighted-svd", "multi")
SCORERS: tuple[str, ...] = ("residual", "mp")

DenoiserFactory = Callable[[int, int], Optional[Denoiser]]


@dataclass(frozen=True)
class MatcherSettings:
    tau: float = matcher_defaults.TAU
    # unit descriptors score in [-1, 1]; a low temperature sharpens the assignment
    temperature: float = 0.1
    iterations: int = matcher_defaults.SINKHORN_ITERATIONS
    top_k: Optional[int] = None
    # feature grid (rows, cols) for positional encodings in the top-K stage
    grid_shape: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class PipelineConfig:
    refinement: bool = False
    solver: SolverChoice = "multi"
    scorer: ScorerChoice = "residual"
    init: InitChoice = "ransac"
    hypotheses: int = solver_defaults.HYPOTHESES
    knn_k: int = graph_defaults.KNN_K
    pixel_k: Optional[int] = None
    lift_mode: LiftMode = "depth"
    triangulation: TriangulationMethod = "dlt"
    recover_scale: bool = True
    min_matches: int = solver_defaults.MIN_MATCHES
    ransac: RansacConfig = field(default_factory=RansacConfig)
    matcher: MatcherSettings = field(default_factory=MatcherSettings)
    schedule: Optional[NoiseSchedule] = None
    refine_start_t: Optional[int] = None
    stochastic_refinement: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise ConfigError(f"Unknown solver '{self.solver}', expected one of {SOLVERS}")
        if self.scorer not in SCORERS:
            raise ConfigError(f"Unknown scorer '{self.scorer}', expected one of {SCORERS}")
        if self.init not in ("ransac", "eight-point"):
            raise ConfigError(f"Unknown initializer '{self.init}'")
        if self.min_matches < 5:
            raise ConfigError(f"min_matches must be >= 5, got {self.min_matches}")


@dataclass(frozen=True, eq=False)
class Frame:
    """Matching inputs of one frame; ``depths`` has one entry per descriptor row."""

    index: int
    descriptors: Optional[DescriptorSet] = None
    depths: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PairDiagnostics:
    frame_a: int
    frame_b: int
    matches: int
    graph_nodes: int
    support: int
    hypotheses: int
    sampson: float
    sampson_before: float
    sampson_after: float
    refined: bool
    scale: Optional[float]
    fallback: bool = False


class PairEstimate(NamedTuple):
    pose: Pose
    hypothesis: Optional[EssentialHypothesis]
    diagnostics: PairDiagnostics
    # intermediates kept for dumps; empty for the RANSAC solver and fallbacks
    graph: Optional[CorrespondenceGraph] = None
    candidates: tuple[EssentialHypothesis, ...] = ()


@contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except EpivoError as e:
        raise StageError(name, e) from e


def _matched(
    frame_a: Frame,
    frame_b: Frame,
    config: PipelineConfig,
    cam: CameraModel,
    correspondences: Optional[Sequence[Correspondence]],
    depths: Optional[np.ndarray],
) -> tuple[list[Correspondence], Optional[np.ndarray]]:
    if correspondences is not None:
        matches = list(correspondences)
        if depths is not None and len(depths) != len(matches):
            raise DataError(f"{len(matches)} correspondences but {len(depths)} depth values")
        return matches, None if depths is None else np.asarray(depths, dtype=np.float64)

    if frame_a.descriptors is None or frame_b.descriptors is None:
        raise DataError(
            f"Frames {frame_a.index} and {frame_b.index} carry neither matches nor descriptors"
        )
    settings = config.matcher
    matches = match_descriptors(
        frame_a.descriptors,
        frame_b.descriptors,
        tau=settings.tau,
        temperature=settings.temperature,
        iterations=settings.iterations,
        top_k=settings.top_k,
        image_size=(cam.width, cam.height),
        grid_shape=settings.grid_shape,
    )
    if frame_a.depths is None or not matches:
        return matches, None
    return matches, np.asarray(frame_a.depths, dtype=np.float64)[[c.index_a for c in matches]]


def _initial_essential(
    x1: np.ndarray, x2: np.ndarray, config: PipelineConfig
) -> EssentialHypothesis:
    if config.init == "ransac":
        return ransac_estimate(x1, x2, config.ransac)
    return eight_point(x1, x2)


def _consistency(x1: np.ndarray, x2: np.ndarray, reference: Optional[np.ndarray]) -> float:
    """Mean Sampson (normalized units) under ``reference``, or under a self-fitted E."""
    if reference is None:
        try:
            reference = eight_point(x1, x2).matrix
        except PipelineError:
            return float("nan")
    return sampson_residuals(reference, x1, x2).mean()


def _refined(
    matches: list[Correspondence],
    denoiser: Optional[Denoiser],
    config: PipelineConfig,
    cam: CameraModel,
    seed: int,
) -> list[Correspondence]:
    if denoiser is None:
        raise ConfigError("Refinement is enabled but no denoiser was supplied")
    schedule = config.schedule or getattr(denoiser, "schedule", None) or NoiseSchedule.linear()
    x1, x2 = correspondence_arrays(matches)
    return refine(
        matches,
        denoiser,
        schedule,
        config.refine_start_t,
        seed,
        cam=cam,
        fundamental=pixel_fundamental(x1, x2, cam),
        stochastic=config.stochastic_refinement,
    )


def pair_seed(seed: int, a: int, b: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(a), int(b)]).generate_state(1)[0])


def estimate_pair(
    frame_a: Frame,
    frame_b: Frame,
    config: PipelineConfig = PipelineConfig(),
    *,
    cam: CameraModel,
    correspondences: Optional[Sequence[Correspondence]] = None,
    depths: Optional[np.ndarray] = None,
    denoiser: Optional[Denoiser] = None,
    reference: Optional[Pose] = None,
) -> PairEstimate:
    """Point-transfer pose a → b (X_b = R X_a + t) with its hypothesis and diagnostics.

    ``correspondences`` (with per-match ``depths``) bypass the matcher.
    ``reference`` is only used to measure Sampson before/after refinement;
    without it both are measured under a self-fitted eight-point E.
    """
    seed = pair_seed(config.seed, frame_a.index, frame_b.index)
    with stage("matcher"):
        matches, values = _matched(frame_a, frame_b, config, cam, correspondences, depths)
        if len(matches) < config.min_matches:
            raise NoValidMatchError(
                f"Only {len(matches)} match(es) between frames {frame_a.index} and "
                f"{frame_b.index}; need {config.min_matches}"
            )

    reference_e = essential_from_pose(reference).matrix if reference is not None else None
    x1, x2 = correspondence_arrays(matches)
    x1n, x2n = cam.normalize(x1), cam.normalize(x2)
    sampson_before = _consistency(x1n, x2n, reference_e)

    refined = False
    if config.refinement:
        with stage("refine"):
            matches = _refined(matches, denoiser, config, cam, seed)
            x1, x2 = correspondence_arrays(matches)
            x1n, x2n = cam.normalize(x1), cam.normalize(x2)
            refined = True
    sampson_after = _consistency(x1n, x2n, reference_e) if refined else sampson_before

    with stage("init"):
        e_init = _initial_essential(x1n, x2n, config)

    graph_nodes, n_hypotheses = 0, 1
    graph: Optional[CorrespondenceGraph] = None
    if config.solver == "ransac":
        hypothesis = e_init
        candidates: tuple[EssentialHypothesis, ...] = (e_init,)
        support = e_init.inliers if e_init.inliers is not None else np.ones(len(x1n), dtype=bool)
        used1, used2 = x1n[support], x2n[support]
    else:
        with stage("graph"):
            lift_values = values if values is not None else np.ones(len(matches))
            lift_mode = config.lift_mode if values is not None else "depth"
            graph = build_graph(
                matches, lift_values, cam, config.knn_k, mode=lift_mode, pixel_k=config.pixel_k
            )
            mode = "residual" if config.scorer == "residual" else "message_passing"
            graph = graph.with_weights(score_nodes(graph, e_init.e, mode=mode))
            graph_nodes = graph.n
        with stage("solver"):
            used1, used2 = graph.normalized_points()
            if config.solver == "multi":
                result = multi_hypothesis(graph, config.hypotheses)
                hypothesis, n_hypotheses = result.best, len(result.hypotheses)
                candidates = tuple(result.hypotheses)
            else:
                design = DesignMatrix.from_points(used1, used2)
                solution = weighted_svd_solve(
                    design, graph.weights, x1=used1, x2=used2, with_gradient=False
                )
                hypothesis = solution.hypothesis
                candidates = (hypothesis,)
            positive = graph.weights > 0
            if np.count_nonzero(positive) >= 1:
                used1, used2 = used1[positive], used2[positive]

    with stage("chirality"):
        poses = decompose(hypothesis.e)
        outcome = rank_candidates(poses, used1, used2, config.triangulation)
        pose = poses[outcome.index]

    scale = None
    if config.recover_scale and values is not None:
        with stage("scale"):
            metric = values if config.lift_mode == "depth" else depth_from_disparity(values, cam)
            pose = recover_scale(pose, matches, metric, cam)
            scale = float(np.linalg.norm(pose.t))

    diagnostics = PairDiagnostics(
        frame_a=frame_a.index,
        frame_b=frame_b.index,
        matches=len(matches),
        graph_nodes=graph_nodes,
        support=len(used1),
        hypotheses=n_hypotheses,
        sampson=float(hypothesis.sampson_score),
        sampson_before=float(sampson_before),
        sampson_after=float(sampson_after),
        refined=refined,
        scale=scale,
    )
    logger.debug(
        f"Pair {frame_a.index}->{frame_b.index}: {len(matches)} match(es), support {len(used1)}, "
        f"Sampson {sampson_before:.3e} -> {sampson_after:.3e}"
    )
    return PairEstimate(
        pose=pose,
        hypothesis=hypothesis,
        diagnostics=diagnostics,
        graph=graph,
        candidates=candidates,
    )


# --- sequences -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairTask:
    """Everything ``estimate_pair`` needs for one frame pair of a sequence."""

    frame_a: Frame
    frame_b: Frame
    correspondences: Optional[list[Correspondence]] = None
    depths: Optional[np.ndarray] = None
    reference: Optional[Pose] = None


@dataclass(frozen=True, eq=False)
class SequenceResult:
    """Per-pair outcomes in pair order; failed pairs hold the substituted pose."""

    relatives: list[Pose]
    estimates: list[PairEstimate]
    failures: dict[int, StageError]

    @property
    def fallback_flags(self) -> list[bool]:
        return [e.diagnostics.fallback for e in self.estimates]

    def camera_motions(self) -> list[Pose]:
        """Inverses of the point-transfer poses, ready for ``chain``."""
        return [p.inverse() for p in self.relatives]


def pair_indices(n_frames: int, stride: int = 1) -> list[tuple[int, int]]:
    """(k, k + stride) for k = 0, stride, 2·stride, ... while k + stride < n_frames."""
    if stride < 1:
        raise ConfigError(f"Frame stride must be >= 1, got {stride}")
    return [(k, k + stride) for k in range(0, n_frames - stride, stride)]


def _fallback_diagnostics(task: PairTask) -> PairDiagnostics:
    nan = float("nan")
    return PairDiagnostics(
        frame_a=task.frame_a.index,
        frame_b=task.frame_b.index,
        matches=len(task.correspondences or []),
        graph_nodes=0,
        support=0,
        hypotheses=0,
        sampson=nan,
        sampson_before=nan,
        sampson_after=nan,
        refined=False,
        scale=None,
        fallback=True,
    )


def estimate_sequence(
    tasks: Sequence[PairTask],
    config: PipelineConfig,
    *,
    cam: CameraModel,
    denoiser_for: Optional[DenoiserFactory] = None,
    workers: int = 1,
) -> SequenceResult:
    """Estimate every pair (thread pool), then fill failures by constant velocity.

    A failed pair reuses the previous pair's relative pose (identity for the
    first pair) and is flagged in its diagnostics.
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    def run(task: PairTask) -> PairEstimate | StageError:
        try:
            denoiser = None
            if denoiser_for is not None:
                with stage("refine"):
                    denoiser = denoiser_for(task.frame_a.index, task.frame_b.index)
            return estimate_pair(
                task.frame_a,
                task.frame_b,
                config,
                cam=cam,
                correspondences=task.correspondences,
                depths=task.depths,
                denoiser=denoiser,
                reference=task.reference,
            )
        except StageError as e:
            return e.at_frame(task.frame_a.index)

    if workers == 1:
        outcomes = [run(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, tasks))

    relatives: list[Pose] = []
    estimates: list[PairEstimate] = []
    failures: dict[int, StageError] = {}
    for k, (task, outcome) in enumerate(zip(tasks, outcomes)):
        if isinstance(outcome, StageError):
            if isinstance(outcome.cause, ConfigError):
                raise outcome
            previous = relatives[-1] if relatives else Pose.identity()
            logger.warning(f"Pair {k} failed ({outcome}); reusing the previous relative pose")
            failures[k] = outcome
            outcome = PairEstimate(previous, None, _fallback_diagnostics(task))
        relatives.append(outcome.pose)
        estimates.append(outcome)

    logger.info(f"Estimated {len(tasks)} pair(s), {len(failures)} constant-velocity fallback(s)")
    return SequenceResult(relatives=relatives, estimates=estimates, failures=failures)
