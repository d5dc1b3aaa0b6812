"""Repository paths for config data and outputs."""

from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "config"


def run_config_path() -> Path:
    return CONFIG_DIR / "run.json"


def simulate_config_path() -> Path:
    return CONFIG_DIR / "simulate.json"
