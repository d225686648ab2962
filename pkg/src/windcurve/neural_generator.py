"""Image-to-image generative model that denoises scatter images into curves.

A symmetric encoder/decoder convolutional network: each stage is two
(3x3 conv, batch norm, ReLU) blocks, downsampling by 2x2 max pooling and
upsampling by 2x2 transposed convolution, with optional skip connections
between matching stages (skipless = plain convolutional autoencoder).
Trains on synthesized (scatter image, clean curve image) pairs only.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

CHECKPOINT_FORMAT_VERSION = 1


class DimensionMismatchError(ValueError):
    """Input image shape is incompatible with the network configuration."""


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss."""


class CheckpointError(RuntimeError):
    """Checkpoint file is unreadable or malformed."""


class ArchitectureMismatchError(CheckpointError):
    """Checkpoint network configuration differs from the expected one."""


@dataclass(frozen=True)
class NetworkConfig:
    """Depth/width of the generator.

    ``stages`` down/up-sampling levels halve then restore the feature map
    (256 -> 16 -> 256 with the default four); channel widths double per
    stage from ``base_channels``. ``skip_connections`` toggles between the
    skip-connected network and the plain autoencoder variant.
    """

    base_channels: int = 64
    stages: int = 4
    in_channels: int = 3
    out_channels: int = 3
    skip_connections: bool = True

    def __post_init__(self):
        if self.base_channels < 1 or self.stages < 1:
            raise ValueError("base_channels and stages must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "mse"
    n_iter: int = 40
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("mse", "l1", "smooth_l1"):
            raise ValueError("loss must be one of mse/l1/smooth_l1")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _conv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class CurveGenerator(nn.Module):
    """Encoder/decoder with optional skip connections."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        widths = [config.base_channels * 2**i for i in range(config.stages + 1)]

        self.encoders = nn.ModuleList()
        cin = config.in_channels
        for w in widths[:-1]:
            self.encoders.append(_conv_block(cin, w))
            cin = w
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(widths[-2], widths[-1])

        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for w_above, w in zip(widths[::-1][:-1], widths[::-1][1:]):
            self.upsamplers.append(nn.ConvTranspose2d(w_above, w, 2, stride=2))
            dec_in = 2 * w if config.skip_connections else w
            self.decoders.append(_conv_block(dec_in, w))
        self.head = nn.Conv2d(widths[0], config.out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self._check_input(x)
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.upsamplers, self.decoders, skips[::-1]):
            x = up(x)
            if self.config.skip_connections:
                x = torch.cat([skip, x], dim=1)
            x = dec(x)
        return self.head(x)

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise DimensionMismatchError(
                f"expected (N, {self.config.in_channels}, H, W), got {tuple(x.shape)}"
            )
        factor = 2**self.config.stages
        if x.shape[2] % factor or x.shape[3] % factor:
            raise DimensionMismatchError(
                f"spatial dims {tuple(x.shape[2:])} must be divisible by {factor}"
            )


def build_model(config: NetworkConfig | None = None, seed: int = 0) -> CurveGenerator:
    """Construct a generator with seeded weight initialization."""
    torch.manual_seed(seed)
    return CurveGenerator(config or NetworkConfig())


def _to_tensor(img: np.ndarray) -> torch.Tensor:
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 3:
        raise DimensionMismatchError(f"expected (H, W, C) image, got shape {img.shape}")
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))


def _to_image(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().transpose(1, 2, 0).astype(float)


def forward(model: CurveGenerator, img: np.ndarray) -> np.ndarray:
    """Single-image inference-mode forward pass (no clamping)."""
    model.eval()
    with torch.no_grad():
        out = model(_to_tensor(img)[None])
    return _to_image(out[0])


_LOSS_FUNCTIONS = {
    "mse": nn.functional.mse_loss,
    "l1": nn.functional.l1_loss,
    "smooth_l1": nn.functional.smooth_l1_loss,
}


def loss(pred, target, kind: str = "mse") -> float:
    """Mean-reduced image loss: squared error, absolute error, or the
    quadratic-below-1 / linear-above-1 hybrid (both branches equal 0.5 at
    a unit residual)."""
    if kind not in _LOSS_FUNCTIONS:
        raise ValueError(f"unknown loss kind {kind!r}")
    p = torch.as_tensor(np.asarray(pred, dtype=np.float32))
    t = torch.as_tensor(np.asarray(target, dtype=np.float32))
    if p.shape != t.shape:
        raise DimensionMismatchError(f"shape mismatch {tuple(p.shape)} vs {tuple(t.shape)}")
    return float(_LOSS_FUNCTIONS[kind](p, t))


def train(model: CurveGenerator, pairs, cfg: TrainConfig | None = None):
    """Optimize the generator on (noisy, clean) image pairs.

    ``pairs`` is a sequence of (scatter image, curve image) float arrays
    in [0, 1], each (H, W, 3). Returns (model, per-epoch mean loss list).
    Aborts with :class:`TrainingDivergedError` on a non-finite loss.
    """
    cfg = cfg or TrainConfig()
    if len(pairs) == 0:
        raise ValueError("training dataset is empty")
    inputs = torch.stack([_to_tensor(a) for a, _ in pairs])
    targets = torch.stack([_to_tensor(b) for _, b in pairs])
    if inputs.shape != targets.shape:
        raise DimensionMismatchError("paired images must share one shape")

    loss_fn = _LOSS_FUNCTIONS[cfg.loss]
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    order_rng = np.random.default_rng(cfg.seed)
    n = len(pairs)
    history = []

    model.train()
    for epoch in range(cfg.n_iter):
        perm = order_rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(perm[start : start + cfg.batch_size])
            optimizer.zero_grad()
            out = model(inputs[idx])
            batch_loss = loss_fn(out, targets[idx])
            if not torch.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite {cfg.loss} loss at epoch {epoch}: {batch_loss.item()}"
                )
            batch_loss.backward()
            optimizer.step()
            epoch_losses.append(float(batch_loss.detach()))
        history.append(float(np.mean(epoch_losses)))
    model.eval()
    return model, history


def infer(model: CurveGenerator, img):
    """Inference with outputs clamped to [0, 1].

    Accepts one (H, W, 3) image or a list of them; returns the same shape
    of result, in order.
    """
    single = not isinstance(img, (list, tuple))
    batch = [img] if single else list(img)
    model.eval()
    with torch.no_grad():
        out = model(torch.stack([_to_tensor(im) for im in batch]))
        out = torch.clamp(out, 0.0, 1.0)
    images = [_to_image(o) for o in out]
    return images[0] if single else images


def save_model(model: CurveGenerator, path) -> None:
    """Write a self-describing checkpoint (config + weights), atomically."""
    path = Path(path)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": asdict(model.config),
        "state_dict": model.state_dict(),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_model(path, expected_config: NetworkConfig | None = None) -> CurveGenerator:
    """Reconstruct a generator from a checkpoint.

    Raises :class:`CheckpointError` for unreadable/corrupt files and
    :class:`ArchitectureMismatchError` when ``expected_config`` differs
    from the stored configuration.
    """
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "state_dict" not in payload:
        raise CheckpointError(f"{path} is not a generator checkpoint")
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format {version} != supported {CHECKPOINT_FORMAT_VERSION}"
        )
    config = NetworkConfig(**payload["config"])
    if expected_config is not None and config != expected_config:
        raise ArchitectureMismatchError(
            f"checkpoint config {config} != expected {expected_config}"
        )
    model = CurveGenerator(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
