"""Command-line entry points.

Verbs: synth (write a synthetic dataset), train (run the one-off generator
training), infer (model one SCADA CSV), benchmark (comparison table),
evaluate (score a saved curve against labeled data), plot (overlay
figure), show-config (print the effective configuration).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .curve_models import PiecewiseWpc
from .extraction import pixel_map
from .metrics import evaluate
from .pipeline import NormalizationSpec, RunConfig, ScenarioSpec
from .raster import marker_size_for_test, render_overlay, render_scatter
from .synthesis import synthesize_dataset


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = RunConfig.from_yaml(Path(args.config).read_text())
    elif getattr(args, "profile", "desk") == "full":
        cfg = RunConfig.full_profile()
    else:
        cfg = RunConfig.desk_profile()
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "checkpoint", None):
        cfg.checkpoint = args.checkpoint
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _normalization(args, cfg: RunConfig) -> NormalizationSpec:
    spec = cfg.normalization
    if getattr(args, "rated_power", None) is not None:
        spec = replace(spec, rated_power=args.rated_power)
    if getattr(args, "cutout_speed", None) is not None:
        spec = replace(spec, cutout_speed=args.cutout_speed)
    return spec


def _scenario(args, cfg: RunConfig) -> ScenarioSpec:
    spec = cfg.scenario
    if getattr(args, "scenario", None):
        spec = replace(spec, scenario=args.scenario)
    if getattr(args, "pattern", None):
        spec = replace(spec, pattern=args.pattern)
    if getattr(args, "idp_quantile", None) is not None:
        spec = replace(spec, idp_quantile=args.idp_quantile)
    return spec


def cmd_show_config(args) -> int:
    cfg = _load_config(args)
    print(cfg.to_yaml(), end="")
    return 0


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if args.n is not None:
        cfg.synthesis = replace(cfg.synthesis, n_samples=args.n)
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    dataset = synthesize_dataset(cfg.synthesis)
    manifest = []
    for i, (scatter, truth) in enumerate(dataset):
        scatter.to_csv(out / f"sample_{i:05d}.csv")
        truth.save(out / f"truth_{i:05d}.json")
        manifest.append({"scatter": f"sample_{i:05d}.csv", "truth": f"truth_{i:05d}.json"})
        if args.images:
            render_scatter(scatter, cfg.raster).save_png(out / f"sample_{i:05d}.png")
    pipeline.atomic_write_text(
        out / "dataset_manifest.json", json.dumps(manifest, indent=2) + "\n"
    )
    print(f"wrote {len(dataset)} samples to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)

    def progress(stage, done, total):
        if done % 100 == 0 or done == total:
            print(f"  {stage}: {done}/{total}", file=sys.stderr)

    ckpt = pipeline.run_dit_training(cfg, progress=progress)
    print(f"checkpoint written to {ckpt}")
    return 0


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    if cfg.checkpoint is None:
        print("error: no checkpoint given (--checkpoint or config)", file=sys.stderr)
        return 2
    x, y, n_rejected = pipeline.ingest_scada(args.input, _normalization(args, cfg))
    if n_rejected:
        print(f"rejected {n_rejected} non-finite rows", file=sys.stderr)
    x, y, _ = pipeline.apply_scenario(x, y, _scenario(args, cfg), s2_cfg=cfg.s2_filter)
    out = cfg.resolved_output_dir()
    result = pipeline.run_wpcm(
        x, y, cfg.checkpoint, cfg.raster, cfg.extraction, out_dir=out, tag=args.tag
    )
    if args.dump_points:
        xs, ys = pixel_map(result.generated_image, cfg.raster)
        lines = ["x,y"] + [f"{a!r},{b!r}" for a, b in zip(xs, ys)]
        pipeline.atomic_write_text(out / f"{args.tag}_points.csv", "\n".join(lines) + "\n")
    print(json.dumps(result.curve.to_record(), indent=2))
    print(f"artifacts in {out}", file=sys.stderr)
    return 0


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    x, y, _ = pipeline.ingest_scada(args.input, _normalization(args, cfg))
    models = list(args.models.split(",")) if args.models else None
    if models is None:
        models = ["DE", "ADE", "PLF4", "PLF5", "SNN", "SR"]
        if cfg.checkpoint:
            models.append("DITU-net")
        if cfg.checkpoint_dcae:
            models.append("DITDCAE")
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "metrics.csv"
    rows = pipeline.run_benchmark_suite(
        x, y, cfg, spec=_scenario(args, cfg), models=models, out_path=table_path
    )
    for name, report, error in rows:
        if report is None:
            print(f"{name}: failed ({error})")
        else:
            print(f"{name}: rmse={report.rmse:.5f} mae={report.mae:.5f}")
    print(f"table written to {table_path}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    curve = PiecewiseWpc.load(args.curve)
    x, y, _ = pipeline.ingest_scada(args.input, _normalization(args, cfg))
    report = evaluate(curve(x), y, x, cws=curve.x_cutin)
    print(json.dumps(report.to_row(), indent=2))
    return 0


def cmd_plot(args) -> int:
    cfg = _load_config(args)
    curve = PiecewiseWpc.load(args.curve)
    x, y, _ = pipeline.ingest_scada(args.input, _normalization(args, cfg))
    ms = marker_size_for_test(len(x), cfg.raster)
    overlay = render_overlay((x, y), curve, cfg.raster, marker_size=ms)
    overlay.save_png(args.out_png)
    print(f"overlay written to {args.out_png}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--profile", choices=["desk", "full"], default="desk",
                   help="built-in profile when no config file is given")
    p.add_argument("--out", help="output directory override")
    p.add_argument("--seed", type=int, help="run seed override")


def _add_normalization(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rated-power", type=float, dest="rated_power")
    p.add_argument("--cutout-speed", type=float, dest="cutout_speed")


def _add_scenario(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=["S1", "S2", "S3"])
    p.add_argument("--pattern", choices=["NP", "IDP"])
    p.add_argument("--idp-quantile", type=float, dest="idp_quantile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windcurve",
        description="Wind power curve modeling from SCADA scatter images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("show-config", help="print the effective configuration")
    _add_common(p)
    p.set_defaults(fn=cmd_show_config)

    p = sub.add_parser("synth", help="write a synthetic labeled dataset")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of samples (overrides config)")
    p.add_argument("--images", action="store_true", help="also write scatter PNGs")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train the generator on synthetic pairs")
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", help="model a SCADA CSV with a trained generator")
    _add_common(p)
    _add_normalization(p)
    _add_scenario(p)
    p.add_argument("--input", required=True, help="SCADA CSV path")
    p.add_argument("--checkpoint", help="generator checkpoint path")
    p.add_argument("--tag", default="wpcm", help="output filename prefix")
    p.add_argument("--dump-points", action="store_true", dest="dump_points",
                   help="also write the mapped pixel points CSV")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("benchmark", help="run the benchmark suite on a SCADA CSV")
    _add_common(p)
    _add_normalization(p)
    _add_scenario(p)
    p.add_argument("--input", required=True, help="SCADA CSV path")
    p.add_argument("--checkpoint", help="generator checkpoint for the DIT rows")
    p.add_argument("--models", help="comma-separated subset of models")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("evaluate", help="score a saved curve against a SCADA CSV")
    _add_common(p)
    _add_normalization(p)
    p.add_argument("--input", required=True)
    p.add_argument("--curve", required=True, help="curve record JSON")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("plot", help="render a scatter + curve overlay PNG")
    _add_common(p)
    _add_normalization(p)
    p.add_argument("--input", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--out-png", required=True, dest="out_png")
    p.set_defaults(fn=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
