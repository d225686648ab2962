"""Orchestration: ingestion, scenarios, training runs, curve extraction runs,
benchmark suites, and runtime measurement.

All file writes are atomic (write to a temp name, then rename). A single
trained generator checkpoint serves every dataset and scenario; nothing
here retrains per-dataset.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import benchmarks, metrics, neural_generator
from .curve_models import PiecewiseWpc
from .extraction import ExtractionConfig, extract
from .neural_generator import NetworkConfig, TrainConfig
from .raster import (
    DESK_SCALE,
    RasterConfig,
    WpcImage,
    marker_size_for_test,
    render_curve,
    render_overlay,
    render_scatter,
)
from .synthesis import LABEL_NORMAL, SynthesisConfig, sample_seeds, synthesize_dataset

OUTPUT_DIR_ENV_VAR = "WINDCURVE_OUT"

SCENARIO_ALIASES = {
    "S1": "S1",
    "S1_RAW": "S1",
    "S2": "S2",
    "S2_ROUGH": "S2",
    "S3": "S3",
    "S3_CAREFUL": "S3",
}


class ConfigurationError(ValueError):
    """A run configuration is inconsistent with the requested operation."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Which preprocessing scenario and data-access pattern to run.

    Scenarios: S1 = raw data, S2 = rule-based rough filter, S3 = careful
    cleaning (oracle labels on synthetic data, user-supplied file on real
    data). Patterns: NP = all data accessible, IDP = wind speeds above the
    ``idp_quantile`` of observed speeds are unavailable.
    """

    scenario: str = "S1"
    pattern: str = "NP"
    idp_quantile: float = 0.6

    def __post_init__(self):
        key = self.scenario.upper()
        if key not in SCENARIO_ALIASES:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        object.__setattr__(self, "scenario", SCENARIO_ALIASES[key])
        if self.pattern not in ("NP", "IDP"):
            raise ValueError("pattern must be NP or IDP")
        if not 0.0 < self.idp_quantile <= 1.0:
            raise ValueError("idp_quantile must lie in (0, 1]")


@dataclass(frozen=True)
class S2FilterConfig:
    """Thresholds of the rule-based rough filter.

    Drops near-zero power readings at speeds beyond half the estimated
    rated speed, and thins out over-represented horizontal power bins
    (curtailment stripes) outside the rated plateau.
    """

    low_power_level: float = 0.02
    speed_fraction: float = 0.5
    bin_width: float = 0.01
    bin_ratio: float = 3.0
    plateau_margin: float = 0.02


@dataclass(frozen=True)
class NormalizationSpec:
    """How to normalize raw SCADA units into the unit square.

    Unset values are derived from the data: cut-out speed as 1.05x the
    maximum observed speed, rated power as the 0.99 power quantile.
    """

    rated_power: float | None = None
    cutout_speed: float | None = None


@dataclass
class RunConfig:
    """Bundle of every stage's configuration plus paths and the test split."""

    input_csv: str | None = None
    checkpoint: str | None = None
    checkpoint_dcae: str | None = None
    output_dir: str = "windcurve_out"
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    raster: RasterConfig = field(default_factory=RasterConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    search: benchmarks.SearchConfig = field(default_factory=benchmarks.SearchConfig)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    s2_filter: S2FilterConfig = field(default_factory=S2FilterConfig)
    test_split_fraction: float = 0.2
    mape_cws: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_split_fraction < 1.0:
            raise ValueError("test_split_fraction must lie in (0, 1)")

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV_VAR, self.output_dir))

    @classmethod
    def full_profile(cls, **overrides) -> "RunConfig":
        """Reference profile: 256x256 frame, 4000 samples, width-64 network."""
        return cls(**overrides)

    @classmethod
    def desk_profile(cls, **overrides) -> "RunConfig":
        """Reduced profile for desk CPUs: 64x64 frame, 500 samples, width 16."""
        cfg = cls(
            synthesis=SynthesisConfig(n_samples=500),
            raster=RasterConfig().scaled(DESK_SCALE),
            network=NetworkConfig(base_channels=16),
            train=TrainConfig(n_iter=40),
        )
        return replace(cfg, **overrides)

    def to_yaml(self) -> str:
        doc = {
            "paths": {
                "input_csv": self.input_csv,
                "checkpoint": self.checkpoint,
                "checkpoint_dcae": self.checkpoint_dcae,
                "output_dir": self.output_dir,
            },
            "normalization": asdict(self.normalization),
            "synthesis": asdict(self.synthesis),
            "raster": asdict(self.raster),
            "network": asdict(self.network),
            "train": asdict(self.train),
            "extraction": asdict(self.extraction),
            "search": asdict(self.search),
            "scenario": asdict(self.scenario),
            "s2_filter": asdict(self.s2_filter),
            "protocol": {
                "test_split_fraction": self.test_split_fraction,
                "mape_cws": self.mape_cws,
                "seed": self.seed,
            },
        }
        return yaml.safe_dump(doc, sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        doc = yaml.safe_load(text) or {}
        paths = doc.get("paths", {})
        protocol = doc.get("protocol", {})

        def build(section, factory):
            data = doc.get(section)
            return factory(**data) if data else factory()

        synthesis = build("synthesis", SynthesisConfig)
        if doc.get("synthesis", {}).get("discard_quantile_range"):
            synthesis = replace(
                synthesis,
                discard_quantile_range=tuple(doc["synthesis"]["discard_quantile_range"]),
            )
        return cls(
            input_csv=paths.get("input_csv"),
            checkpoint=paths.get("checkpoint"),
            checkpoint_dcae=paths.get("checkpoint_dcae"),
            output_dir=paths.get("output_dir", "windcurve_out"),
            normalization=build("normalization", NormalizationSpec),
            synthesis=synthesis,
            raster=build("raster", RasterConfig),
            network=build("network", NetworkConfig),
            train=build("train", TrainConfig),
            extraction=build("extraction", ExtractionConfig),
            search=build("search", benchmarks.SearchConfig),
            scenario=build("scenario", ScenarioSpec),
            s2_filter=build("s2_filter", S2FilterConfig),
            test_split_fraction=protocol.get("test_split_fraction", 0.2),
            mape_cws=protocol.get("mape_cws", 0.1),
            seed=protocol.get("seed", 0),
        )


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def ingest_scada(csv_path, normalization: NormalizationSpec | None = None):
    """Load and normalize a SCADA CSV with wind_speed / wind_power columns.

    Returns (x, y, n_rejected): normalized coordinates clipped into the
    unit square (negative power clips to zero) and the count of dropped
    non-finite rows.
    """
    normalization = normalization or NormalizationSpec()
    frame = pd.read_csv(csv_path)
    for column in ("wind_speed", "wind_power"):
        if column not in frame.columns:
            raise ValueError(f"missing column {column!r} in {csv_path}")
    if len(frame) == 0:
        raise ValueError(f"empty SCADA file {csv_path}")
    speed = pd.to_numeric(frame["wind_speed"], errors="coerce").to_numpy(float)
    power = pd.to_numeric(frame["wind_power"], errors="coerce").to_numpy(float)
    finite = np.isfinite(speed) & np.isfinite(power)
    n_rejected = int(len(speed) - finite.sum())
    speed, power = speed[finite], power[finite]
    if len(speed) == 0:
        raise ValueError("no finite rows after rejection")

    cutout = normalization.cutout_speed
    if cutout is None:
        cutout = 1.05 * float(np.max(speed))
    rated = normalization.rated_power
    if rated is None:
        rated = float(np.quantile(power, 0.99))
    if cutout <= 0 or rated <= 0:
        raise ValueError("normalization constants must be positive")
    x = np.clip(speed / cutout, 0.0, 1.0)
    y = np.clip(power / rated, 0.0, 1.0)
    return x, y, n_rejected


def _estimate_rated_speed(x: np.ndarray, y: np.ndarray) -> float:
    """Speed at which binned median power first nears its plateau."""
    bins = np.linspace(0.0, 1.0, 21)
    medians = np.full(20, np.nan)
    for i in range(20):
        mask = (x >= bins[i]) & (x < bins[i + 1])
        if mask.any():
            medians[i] = np.median(y[mask])
    if np.all(np.isnan(medians)):
        return 1.0
    top = np.nanmax(medians)
    for i in range(20):
        if not np.isnan(medians[i]) and medians[i] >= 0.9 * top:
            return float(bins[i + 1])
    return 1.0


def apply_scenario(
    x,
    y,
    spec: ScenarioSpec,
    labels=None,
    s2_cfg: S2FilterConfig | None = None,
    cleaned: tuple | None = None,
):
    """Filter (x, y) according to the scenario, then the access pattern.

    S3 keeps oracle-normal labels on synthetic data; real data must come
    with a user-supplied ``cleaned`` (x, y) pair instead. IDP then removes
    every point whose speed exceeds the configured speed quantile.
    Returns (x, y, labels-or-None).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s2_cfg = s2_cfg or S2FilterConfig()

    if spec.scenario == "S1":
        pass
    elif spec.scenario == "S2":
        keep = np.ones(len(x), dtype=bool)
        rated_speed = _estimate_rated_speed(x, y)
        keep &= ~((y < s2_cfg.low_power_level) & (x > s2_cfg.speed_fraction * rated_speed))
        # Thin overfull horizontal bins outside the rated plateau.
        plateau_level = float(np.quantile(y, 0.99)) - s2_cfg.plateau_margin
        bin_idx = np.floor(y / s2_cfg.bin_width).astype(int)
        counts = np.bincount(bin_idx[keep])
        occupied = counts[counts > 0]
        if len(occupied) > 0:
            median_count = float(np.median(occupied))
            centers = (np.arange(len(counts)) + 0.5) * s2_cfg.bin_width
            overfull = (counts > s2_cfg.bin_ratio * median_count) & (centers < plateau_level)
            keep &= ~overfull[bin_idx]
        x, y = x[keep], y[keep]
        labels = labels[keep] if labels is not None else None
    elif spec.scenario == "S3":
        if labels is not None:
            keep = np.asarray(labels) == LABEL_NORMAL
            x, y, labels = x[keep], y[keep], np.asarray(labels)[keep]
        elif cleaned is not None:
            x, y = np.asarray(cleaned[0], dtype=float), np.asarray(cleaned[1], dtype=float)
        else:
            raise ConfigurationError(
                "S3 on unlabeled real data requires a user-supplied cleaned file"
            )

    if spec.pattern == "IDP":
        threshold = float(np.quantile(x, spec.idp_quantile))
        keep = x <= threshold
        x, y = x[keep], y[keep]
        labels = np.asarray(labels)[keep] if labels is not None else None
    return x, y, labels


def run_dit_training(cfg: RunConfig, progress=None):
    """Synthesize, rasterize, and train the generator once.

    Writes the checkpoint, a per-epoch loss history CSV, and a manifest
    recording the configuration and per-sample seeds. Returns the
    checkpoint path.
    """
    out_dir = cfg.resolved_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = synthesize_dataset(cfg.synthesis)
    pairs = []
    for scatter, truth in dataset:
        ix = render_scatter(scatter, cfg.raster)
        iw = render_curve(truth, cfg.raster)
        pairs.append((ix.pixels, iw.pixels))
        if progress is not None:
            progress("raster", len(pairs), len(dataset))

    model = neural_generator.build_model(cfg.network, seed=cfg.train.seed)
    model, history = neural_generator.train(model, pairs, cfg.train)

    ckpt_path = out_dir / "generator.pt"
    neural_generator.save_model(model, ckpt_path)

    history_path = out_dir / "loss_history.csv"
    lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(history)]
    atomic_write_text(history_path, "\n".join(lines) + "\n")

    manifest = {
        "synthesis": asdict(cfg.synthesis),
        "raster": asdict(cfg.raster),
        "network": asdict(cfg.network),
        "train": asdict(cfg.train),
        "sample_seeds": [seq.entropy for seq in sample_seeds(cfg.synthesis)],
        "n_pairs": len(pairs),
        "final_loss": history[-1],
    }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return ckpt_path


@dataclass
class WpcmResult:
    curve: PiecewiseWpc
    scatter_image: WpcImage
    generated_image: WpcImage
    overlay_image: WpcImage
    marker_size: float
    paths: dict = field(default_factory=dict)


def run_wpcm(
    x,
    y,
    model,
    raster_cfg: RasterConfig,
    extraction_cfg: ExtractionConfig | None = None,
    out_dir=None,
    tag: str = "wpcm",
) -> WpcmResult:
    """Model one observed scatter: render, denoise, extract, and report.

    ``model`` is a loaded generator, a checkpoint path, or any callable
    mapping an (H, W, 3) image to one. Marker size follows the
    density-matching law from the observed point count. When ``out_dir``
    is given, writes the curve record, both images, and a scatter+curve
    overlay.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 10:
        raise ValueError("need at least 10 data points for curve modeling")
    if isinstance(model, (str, Path)):
        model = neural_generator.load_model(model)

    ms = marker_size_for_test(len(x), raster_cfg)
    scatter_img = render_scatter((x, y), raster_cfg, marker_size=ms)
    if isinstance(model, neural_generator.CurveGenerator):
        raw = neural_generator.infer(model, scatter_img.pixels)
    else:
        raw = np.clip(np.asarray(model(scatter_img.pixels), dtype=float), 0.0, 1.0)
    generated = WpcImage(raw, role="generated")
    try:
        curve = extract(generated, raster_cfg, extraction_cfg)
    except Exception:
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            generated.save_png(out_dir / f"{tag}_generated.png")
        raise

    overlay = render_overlay((x, y), curve, raster_cfg, marker_size=ms)
    result = WpcmResult(
        curve=curve,
        scatter_image=scatter_img,
        generated_image=generated,
        overlay_image=overlay,
        marker_size=ms,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        curve_path = out_dir / f"{tag}_curve.json"
        atomic_write_text(curve_path, json.dumps(curve.to_record(), indent=2) + "\n")
        scatter_img.save_png(out_dir / f"{tag}_scada.png")
        generated.save_png(out_dir / f"{tag}_generated.png")
        overlay.save_png(out_dir / f"{tag}_overlay.png")
        result.paths = {
            "curve": curve_path,
            "scada": out_dir / f"{tag}_scada.png",
            "generated": out_dir / f"{tag}_generated.png",
            "overlay": out_dir / f"{tag}_overlay.png",
        }
    return result


BENCHMARK_PARAMETRIC = ("DE", "ADE", "PLF4", "PLF5")


def run_benchmark_suite(
    x,
    y,
    cfg: RunConfig,
    spec: ScenarioSpec | None = None,
    labels=None,
    models=("DE", "ADE", "PLF4", "PLF5", "SNN", "SR"),
    out_path=None,
):
    """Fit every requested model under one scenario and score the test split.

    The held-out 20% test split is drawn (seeded) from the carefully
    cleaned view of the data, mirroring the protocol of scoring against
    trustworthy points; training data are the remaining points filtered
    by the requested scenario and pattern. The trained generator
    checkpoint is reused as-is; the suite never retrains it. Per-model
    failures are recorded and do not stop other models.

    Returns a list of (model_name, MetricReport | None, error | None).
    """
    spec = spec or cfg.scenario
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    clean_x, clean_y, _ = apply_scenario(
        x, y, ScenarioSpec("S3", "NP"), labels=labels, s2_cfg=cfg.s2_filter
    ) if labels is not None else (x, y, None)
    # Index bookkeeping: the test split is removed from the training pool.
    rng = np.random.default_rng(cfg.seed)
    n_clean = len(clean_x)
    n_test = max(1, int(round(cfg.test_split_fraction * n_clean)))
    test_idx = rng.choice(n_clean, n_test, replace=False)
    test_x, test_y = clean_x[test_idx], clean_y[test_idx]

    if labels is not None:
        clean_mask = np.asarray(labels) == LABEL_NORMAL
        clean_pos = np.flatnonzero(clean_mask)
        drop = np.zeros(len(x), dtype=bool)
        drop[clean_pos[test_idx]] = True
        pool_x, pool_y = x[~drop], y[~drop]
        pool_labels = np.asarray(labels)[~drop]
    else:
        drop = np.zeros(len(x), dtype=bool)
        drop[test_idx] = True
        pool_x, pool_y = x[~drop], y[~drop]
        pool_labels = None

    train_x, train_y, _ = apply_scenario(
        pool_x, pool_y, spec, labels=pool_labels, s2_cfg=cfg.s2_filter
    )

    rows = []
    for name in models:
        try:
            predictor = _fit_benchmark(name, train_x, train_y, cfg)
            report = metrics.evaluate(
                predictor(test_x), test_y, test_x, cws=cfg.mape_cws
            )
            rows.append((name, report, None))
        except Exception as exc:  # report and continue with other models
            rows.append((name, None, exc))

    if out_path is not None:
        _write_metric_table(rows, spec, out_path)
    return rows


def _fit_benchmark(name: str, train_x, train_y, cfg: RunConfig):
    """Fit one named model; returns a predict(x) callable."""
    if name in BENCHMARK_PARAMETRIC:
        model = benchmarks.fit_parametric(train_x, train_y, name, cfg.search)
        return model.predict
    if name == "SNN":
        model = benchmarks.fit_snn(train_x, train_y, seed=cfg.seed)
        return model.predict
    if name == "SR":
        model = benchmarks.fit_spline(train_x, train_y)
        return model.predict
    if name in ("DITU-net", "DITDCAE"):
        ckpt = cfg.checkpoint if name == "DITU-net" else cfg.checkpoint_dcae
        if ckpt is None:
            raise ConfigurationError(f"{name} requires a checkpoint path")
        result = run_wpcm(train_x, train_y, ckpt, cfg.raster, cfg.extraction)
        return result.curve
    raise ConfigurationError(f"unknown benchmark model {name!r}")


def _write_metric_table(rows, spec: ScenarioSpec, out_path) -> None:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = [
        "model", "scenario", "pattern", "status",
        "rmse", "mae", "mape_pct", "wmape_pct",
        "ss_0.05_pct", "ss_0.1_pct", "ss_0.15_pct",
        "n_points", "n_points_mape",
    ]
    lines = [",".join(fieldnames)]
    for name, report, error in rows:
        if report is None:
            record = {k: "" for k in fieldnames}
            record.update(model=name, scenario=spec.scenario, pattern=spec.pattern,
                          status=f"failed: {type(error).__name__}")
        else:
            row = report.to_row()
            record = {
                "model": name,
                "scenario": spec.scenario,
                "pattern": spec.pattern,
                "status": "ok",
                "rmse": row["rmse"],
                "mae": row["mae"],
                "mape_pct": "" if row["mape_pct"] is None else row["mape_pct"],
                "wmape_pct": "" if row["wmape_pct"] is None else row["wmape_pct"],
                "ss_0.05_pct": row.get("ss_0.05_pct", ""),
                "ss_0.1_pct": row.get("ss_0.1_pct", ""),
                "ss_0.15_pct": row.get("ss_0.15_pct", ""),
                "n_points": row["n_points"],
                "n_points_mape": row["n_points_mape"],
            }
        lines.append(",".join(str(record[k]) for k in fieldnames))
    atomic_write_text(out_path, "\n".join(lines) + "\n")


@dataclass
class RuntimeReport:
    hardware: str
    seconds: dict[str, float]
    repetitions: int


def measure_runtime(tasks: dict, repetitions: int = 5) -> RuntimeReport:
    """Mean wall-clock seconds per invocation, warm-up run excluded.

    ``tasks`` maps a model name to a zero-argument callable performing one
    full curve-modeling invocation.
    """
    if repetitions < 5:
        raise ValueError("need at least 5 repetitions")
    seconds = {}
    for name, fn in tasks.items():
        fn()  # warm-up, excluded
        start = time.perf_counter()
        for _ in range(repetitions):
            fn()
        seconds[name] = (time.perf_counter() - start) / repetitions
    hardware = f"{platform.platform()} / {platform.processor() or 'unknown cpu'}"
    return RuntimeReport(hardware=hardware, seconds=seconds, repetitions=repetitions)


def write_runtime_csv(report: RuntimeReport, path) -> None:
    lines = [f"# hardware: {report.hardware}", "model,seconds"]
    lines += [f"{k},{v!r}" for k, v in report.seconds.items()]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
