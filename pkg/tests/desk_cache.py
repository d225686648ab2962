"""Shared desk-profile training for the slow end-to-end tests.

Training the reduced generator takes tens of minutes on one CPU, so the
checkpoint is cached under .artifacts/ keyed by a hash of every config
that influences it; any config change invalidates the cache and retrains.
Run this file directly to warm the cache ahead of a pytest run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

from windcurve.neural_generator import NetworkConfig, TrainConfig, load_model
from windcurve.pipeline import RunConfig, run_dit_training
from windcurve.raster import RasterConfig
from windcurve.synthesis import SynthesisConfig

REPO_ROOT = Path(__file__).resolve().parent.parent
CACHE_ROOT = REPO_ROOT / ".artifacts"

DESK_SYNTHESIS = SynthesisConfig(n_samples=500, seed=101)
DESK_RASTER = RasterConfig().scaled(0.25)
DESK_NETWORK = NetworkConfig(base_channels=16)
DESK_TRAIN = TrainConfig(loss="mse", n_iter=40, batch_size=8, learning_rate=1e-3, seed=0)


def desk_run_config(output_dir: Path) -> RunConfig:
    return RunConfig(
        output_dir=str(output_dir),
        synthesis=DESK_SYNTHESIS,
        raster=DESK_RASTER,
        network=DESK_NETWORK,
        train=DESK_TRAIN,
    )


def _cache_key() -> str:
    blob = json.dumps(
        {
            "synthesis": asdict(DESK_SYNTHESIS),
            "raster": asdict(DESK_RASTER),
            "network": asdict(DESK_NETWORK),
            "train": asdict(DESK_TRAIN),
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def desk_checkpoint_path() -> Path:
    return CACHE_ROOT / f"desk_{_cache_key()}" / "generator.pt"


def ensure_desk_checkpoint(progress=None) -> Path:
    """Train the desk-profile generator unless the cached checkpoint exists."""
    ckpt = desk_checkpoint_path()
    if ckpt.exists():
        load_model(ckpt, expected_config=DESK_NETWORK)  # validates the cache
        return ckpt
    cfg = desk_run_config(ckpt.parent)
    return run_dit_training(cfg, progress=progress)


if __name__ == "__main__":
    def report(stage, done, total):
        if done % 100 == 0:
            print(f"{stage}: {done}/{total}", flush=True)

    path = ensure_desk_checkpoint(progress=report)
    print(f"desk checkpoint ready at {path}")
