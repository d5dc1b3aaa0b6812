"""
Synthetic sequence generation - writes a fixture directory for ``run``
"""

from pathlib import Path

from epivo.actions.common import config_payload
from epivo.core.config_loader import noise_config, scene_config
from epivo.core.logger import logger
from epivo.core.schemas import RunConfig
from epivo.datasets.fixture import load_fixture, verify_clean_pairs, write_fixture
from epivo.pipeline.estimator import pair_indices
from epivo.pipeline.report import config_hash
from epivo.simulation.pseudo_gt import observe_pair
from epivo.simulation.scene import generate_scene


def run_simulate_action(config: RunConfig, output_dir: Path) -> list[Path]:
    """Generate the scene, observe every (k, k + stride) pair, write and re-check the fixture."""
    scene = generate_scene(scene_config(config), config.seed)
    noise = noise_config(config)
    pairs = pair_indices(scene.n_frames, config.pipeline.stride)
    observations = [
        observe_pair(
            scene,
            a,
            b,
            noise,
            config.seed,
            descriptor_noise_max=config.scene.descriptor_noise_max,
        )
        for a, b in pairs
    ]
    fmt = config.dataset.pose_format or "kitti"
    written = write_fixture(
        output_dir,
        scene,
        observations,
        seed=config.seed,
        pose_format=fmt,
        extra={
            "config_sha256": config_hash(config_payload(config)),
            "noise": config.noise.model_dump(),
            "stride": config.pipeline.stride,
        },
    )

    worst = verify_clean_pairs(load_fixture(output_dir))
    logger.info(
        f"Simulated {scene.n_frames} frame(s) into {output_dir}; "
        f"clean correspondences epipolar-exact (max Sampson {worst:.2e} px²)"
    )
    return written
