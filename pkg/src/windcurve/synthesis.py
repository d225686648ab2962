"""Synthetic SCADA scatter generation around sampled ground-truth curves.

Each synthesized sample combines three point patterns: normal data whose
vertical noise scales with the curve's local slope (through a variance
projection of the derivative), stacked outliers forming a horizontal
curtailment stripe below the curve, and sparse outliers uniform on the
unit square. A random truncation step then simulates insufficient data by
discarding everything above a random speed or power threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curve_models import WpcFunction, sample_wpc_function

LABEL_NORMAL = "normal"
LABEL_STACKED = "stacked"
LABEL_SPARSE = "sparse"
LABELS = (LABEL_NORMAL, LABEL_STACKED, LABEL_SPARSE)

STRIPE_LEVEL_RANGE = (0.1, 0.9)
STRIPE_MAX_REDRAWS = 100
# Stripe jitter is truncated at 3 sigma so stacked points provably sit
# below the curve: f(x) > y - 3*sigma_stacked at every stacked point.
STRIPE_JITTER_CLIP = 3.0


@dataclass(frozen=True)
class SynthesisConfig:
    """Counts, noise amplitudes and truncation behavior for one dataset.

    The default per-sample counts (1000 normal, 150 stacked, 250 sparse)
    give 1400 points per un-truncated sample; ``n_samples`` is the number
    of (scatter, truth) training pairs. ``discard_quantile_range`` is the
    interval the random truncation threshold is drawn from, applied
    directly to the normalized coordinate of the chosen axis.
    """

    n_samples: int = 4000
    n_normal: int = 1000
    n_stacked: int = 150
    n_sparse: int = 250
    sigma_normal: float = 0.05
    sigma_stacked: float = 0.01
    stacked_mode: str = "stripe"
    discard_prob: float = 0.3
    discard_quantile_range: tuple[float, float] = (0.5, 0.95)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_samples", "n_normal", "n_stacked", "n_sparse"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.discard_prob <= 1.0:
            raise ValueError("discard_prob must lie in [0, 1]")
        lo, hi = self.discard_quantile_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("discard_quantile_range must be within [0, 1]")
        if self.stacked_mode not in ("stripe", "around_curve"):
            raise ValueError("stacked_mode must be 'stripe' or 'around_curve'")


@dataclass
class ScatterSet:
    """Labeled normalized (speed, power) points; labels partition the set."""

    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.labels = np.asarray(self.labels)
        if not (len(self.x) == len(self.y) == len(self.labels)):
            raise ValueError("x, y, labels must have equal length")

    def __len__(self) -> int:
        return len(self.x)

    @classmethod
    def empty(cls) -> "ScatterSet":
        return cls(np.empty(0), np.empty(0), np.empty(0, dtype="<U8"))

    @classmethod
    def concat(cls, parts) -> "ScatterSet":
        return cls(
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.labels for p in parts]),
        )

    def subset(self, mask: np.ndarray) -> "ScatterSet":
        return ScatterSet(self.x[mask], self.y[mask], self.labels[mask])

    def label_counts(self) -> dict:
        return {lab: int(np.sum(self.labels == lab)) for lab in LABELS}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["wind_speed", "wind_power", "label"])
            for xi, yi, li in zip(self.x, self.y, self.labels):
                writer.writerow([repr(float(xi)), repr(float(yi)), str(li)])

    @classmethod
    def from_csv(cls, path) -> "ScatterSet":
        xs, ys, labels = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                xs.append(float(row["wind_speed"]))
                ys.append(float(row["wind_power"]))
                labels.append(row["label"])
        return cls(np.asarray(xs), np.asarray(ys), np.asarray(labels))


def variance_projection(d) -> np.ndarray:
    """Map derivative values to per-point noise scales in [0, 1].

    Min-max normalize the batch, then keep the normalized value below 0.7
    and switch to (1 - (eta - 1)^4)^0.5 above it. A constant input has no
    variation to project, so it maps to all-zeros.
    """
    d = np.asarray(d, dtype=float)
    if d.size == 0:
        raise ValueError("derivative vector must be non-empty")
    d_min, d_max = d.min(), d.max()
    if d_max == d_min:
        return np.zeros_like(d)
    eta = (d - d_min) / (d_max - d_min)
    return np.where(eta < 0.7, eta, np.sqrt(1.0 - (eta - 1.0) ** 4))


def synthesize_normal(f: WpcFunction, count: int, sigma_normal: float, rng: np.random.Generator) -> ScatterSet:
    """Points on the curve with slope-proportional vertical noise."""
    if count <= 0:
        raise ValueError("count must be positive")
    x = rng.uniform(0.0, 1.0, count)
    phi = variance_projection(f.derivative(x))
    eps = rng.standard_normal(count)
    y = np.clip(f(x) + eps * sigma_normal * phi, 0.0, 1.0)
    return ScatterSet(x, y, np.full(count, LABEL_NORMAL))


def synthesize_stacked(
    f: WpcFunction,
    count: int,
    sigma_stacked: float,
    rng: np.random.Generator,
    mode: str = "stripe",
) -> ScatterSet:
    """Curtailment-style stacked outliers.

    ``stripe`` (default): a horizontal band at level c ~ U[0.1, 0.9],
    horizontally confined to {x : f(x) > c} so the stripe sits below the
    curve. ``around_curve`` keeps the unprojected jitter-around-the-curve
    variant. Returns an empty subset if no stripe level fits under the
    curve after 100 redraws.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if mode == "around_curve":
        x = rng.uniform(0.0, 1.0, count)
        y = np.clip(f(x) + rng.standard_normal(count) * sigma_stacked, 0.0, 1.0)
        return ScatterSet(x, y, np.full(count, LABEL_STACKED))

    level = None
    top = float(f(1.0))
    for _ in range(STRIPE_MAX_REDRAWS):
        c = rng.uniform(*STRIPE_LEVEL_RANGE)
        if top > c:
            level = c
            break
    if level is None:
        return ScatterSet.empty()
    if float(f(0.0)) > level:
        x_entry = 0.0
    else:
        x_entry = brentq(lambda t: f(t) - level, 0.0, 1.0, xtol=1e-12)
    # Nudge off the boundary so f(x) > level holds strictly at every draw.
    x = rng.uniform(min(x_entry + 1e-6, 1.0), 1.0, count)
    eps = np.clip(rng.standard_normal(count), -STRIPE_JITTER_CLIP, STRIPE_JITTER_CLIP)
    y = np.clip(level + eps * sigma_stacked, 0.0, 1.0)
    return ScatterSet(x, y, np.full(count, LABEL_STACKED))


def synthesize_sparse(count: int, rng: np.random.Generator) -> ScatterSet:
    """Sensor-fault style outliers: i.i.d. uniform on the unit square."""
    if count <= 0:
        raise ValueError("count must be positive")
    a = rng.uniform(0.0, 1.0, count)
    b = rng.uniform(0.0, 1.0, count)
    return ScatterSet(a, b, np.full(count, LABEL_SPARSE))


def random_discard(
    scatter: ScatterSet,
    discard_prob: float,
    quantile_range: tuple[float, float],
    rng: np.random.Generator,
) -> ScatterSet:
    """With probability ``discard_prob``, truncate one random axis.

    Picks speed or power uniformly, draws a threshold uniformly from
    ``quantile_range``, and drops every point whose coordinate exceeds it.
    """
    if rng.uniform() >= discard_prob:
        return scatter
    axis = "speed" if rng.uniform() < 0.5 else "power"
    threshold = rng.uniform(*quantile_range)
    coord = scatter.x if axis == "speed" else scatter.y
    return scatter.subset(coord <= threshold)


def synthesize_sample(config: SynthesisConfig, rng: np.random.Generator) -> tuple[ScatterSet, WpcFunction]:
    """One labeled scatter plus its ground truth curve."""
    f = sample_wpc_function(rng)
    parts = [
        synthesize_normal(f, config.n_normal, config.sigma_normal, rng),
        synthesize_stacked(f, config.n_stacked, config.sigma_stacked, rng, config.stacked_mode),
        synthesize_sparse(config.n_sparse, rng),
    ]
    scatter = ScatterSet.concat(parts)
    scatter = random_discard(scatter, config.discard_prob, config.discard_quantile_range, rng)
    return scatter, f


def sample_seeds(config: SynthesisConfig) -> list[np.random.SeedSequence]:
    """Per-sample seed sequences derived deterministically from config.seed."""
    return np.random.SeedSequence(config.seed).spawn(config.n_samples)


def synthesize_dataset(config: SynthesisConfig) -> list[tuple[ScatterSet, WpcFunction]]:
    """n_samples independent (scatter, truth) pairs, reproducible by seed.

    Each sample runs on its own spawned RNG stream, so generation order
    (or parallel generation) cannot change the result.
    """
    return [
        synthesize_sample(config, np.random.default_rng(seq))
        for seq in sample_seeds(config)
    ]
