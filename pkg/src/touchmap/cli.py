"""Command-line entry points tying the pipeline together.

Subcommands: gen-data, train, eval, two-point, multi-contact, infer,
gradcheck.  Every command is deterministic under fixed flags and seed; all
state flows through flags and the optional JSON config (no environment
variables).

Exit codes: 0 success, 2 missing input, 3 shape/resolution mismatch,
4 format corruption, 1 everything else (including usage errors).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .codec import GridMapping, HeatmapGrid, extract_peaks, format_peaks_csv
from .config import RunConfig, load_run_config
from .dataset import build_dataset, concat_views, load_dataset, parse_scenario, split_dataset
from .engine import CnnBaseline, CnnBaselineSpec, UNet, build_from_state
from .engine.gradcheck import OP_CHECKS, run_op_suite
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    MissingInputError,
    ShapeError,
    TouchmapError,
)
from .evaluation import (
    eval_report_csv,
    evaluate_single_point,
    multi_contact_csv,
    multi_contact_eval,
    two_point_csv,
    two_point_discrimination,
)
from .formats import load_checkpoint, load_tensor, save_checkpoint
from .sim import SamplerConfig
from .training import loss_curve_csv, train

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_INPUT = 2
EXIT_SHAPE_MISMATCH = 3
EXIT_FORMAT_CORRUPTION = 4

# Seed-stream tag for parameter initialization; epoch streams use small ints.
_INIT_STREAM = 1 << 31


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage errors; this pipeline uses 2
    for missing inputs, so usage errors are remapped to the generic 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: config train.seed, else 0)")
    common.add_argument("--config", default=None, help="JSON run-config path")
    common.add_argument("--threads", type=int, default=1, help="worker threads for generation (never affects results)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="touchmap", description="Contact-geometry estimation pipeline for a synthetic tactile sensor.")
    common = _global_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a synthetic contact dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--scenario", required=True, help="counts, e.g. single:5000 or single:5000,dual:1000,triple:1000")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train a model on a dataset")
    p.add_argument("--data", required=True,
                   help="comma-separated dataset dirs; each is split and the train/val parts are pooled")
    p.add_argument("--arch", required=True, choices=("unet", "cnn"), help="heatmap model or regression baseline")
    p.add_argument("--out", required=True, help="output directory for checkpoint + loss curve")
    p.add_argument("--init", default=None, help="checkpoint to start from instead of fresh initialization")
    p.add_argument("--epochs", type=int, default=None, help="override train.max_epochs")
    p.add_argument("--lr", type=float, default=None, help="override train.lr")
    p.add_argument("--batch", type=int, default=None, help="override train.batch_size")
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (
        ("eval", cmd_eval, "single-point regression metrics"),
        ("two-point", cmd_two_point, "separation-sweep discrimination report"),
        ("multi-contact", cmd_multi_contact, "position/depth errors by contact multiplicity"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--data", required=True, help="evaluation dataset directory")
        p.add_argument("--model", required=True, help="TVM1 checkpoint path")
        p.add_argument("--report", required=True, help="output report directory")
        p.set_defaults(func=func)

    p = sub.add_parser("infer", parents=[common], help="predict contacts for one TVT1 image")
    p.add_argument("--model", required=True, help="TVM1 checkpoint path, or 'passthrough' to treat the image as a heatmap")
    p.add_argument("--image", required=True, help="input TVT1 tensor path")
    p.add_argument("--out", required=True, help="output peaks CSV path")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference validation of the op set")
    p.add_argument("--op", default="all", help="op name or 'all'")
    p.add_argument("--tol", type=float, default=1e-5, help="max allowed relative error")
    p.add_argument("--instances", type=int, default=20, help="random instances per op")
    p.add_argument("--corrupt", action="store_true", help="negative control: corrupt one gradient element")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def _resolve_seed(args, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    return cfg.train.seed


def _write_config_echo(out_dir: Path, cfg: RunConfig, command: dict) -> None:
    payload = {"run_config": cfg.to_dict(), "command": command}
    (out_dir / "config.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_gen_data(args) -> int:
    cfg = load_run_config(args.config)
    seed = _resolve_seed(args, cfg)
    scenario = parse_scenario(args.scenario)
    mapping = GridMapping(resolution=cfg.sim.image_resolution)
    manifest = build_dataset(
        args.out,
        master_seed=seed,
        scenario=scenario,
        sim_cfg=cfg.sim,
        kernel=cfg.kernel,
        mapping=mapping,
        sampler=SamplerConfig(),
        threads=max(1, args.threads),
        config_echo=cfg.to_dict(),
    )
    counts = manifest["counts"]
    print(f"wrote {counts['total']} samples to {args.out} "
          f"(single={counts['single']}, dual={counts['dual']}, triple={counts['triple']}, seed={seed})")
    return EXIT_OK


def _load_views(data_arg: str):
    paths = [p for p in data_arg.split(",") if p]
    return [load_dataset(p) for p in paths]


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    seed = _resolve_seed(args, cfg)
    train_cfg = cfg.train
    overrides = {"seed": seed}
    if args.epochs is not None:
        overrides["max_epochs"] = args.epochs
    if args.lr is not None:
        overrides["lr"] = args.lr
    if args.batch is not None:
        overrides["batch_size"] = args.batch
    train_cfg = dataclasses.replace(train_cfg, **overrides)

    views = _load_views(args.data)
    splits = [split_dataset(v, train_cfg.split_ratio, train_cfg.seed) for v in views]
    if len(splits) == 1:
        train_view, val_view = splits[0]
    else:
        train_view = concat_views([s[0] for s in splits])
        val_view = concat_views([s[1] for s in splits])

    if args.init is not None:
        state = load_checkpoint(args.init)
        model = build_from_state(state, out_resolution=cfg.model.out_resolution)
        arch_ok = isinstance(model, UNet) if args.arch == "unet" else isinstance(model, CnnBaseline)
        if not arch_ok:
            raise ConfigError(f"--init checkpoint is not a {args.arch} model")
    else:
        rng = np.random.default_rng([train_cfg.seed, _INIT_STREAM])
        if args.arch == "unet":
            model = UNet(cfg.model, rng)
        else:
            model = CnnBaseline(
                CnnBaselineSpec(in_channels=cfg.model.in_channels, input_hw=cfg.model.out_resolution),
                rng,
            )

    result = train(model, train_view, val_view, train_cfg)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "checkpoint.tvm", model.state_dict())
    (out_dir / "loss_curve.csv").write_text(loss_curve_csv(result.history))
    _write_config_echo(out_dir, cfg, {
        "command": "train", "arch": args.arch, "data": args.data, "seed": train_cfg.seed,
        "epochs": train_cfg.max_epochs, "lr": train_cfg.lr, "batch_size": train_cfg.batch_size,
        "init": args.init,
    })
    print(f"trained {args.arch} on {len(train_view)} samples (val {len(val_view)}) "
          f"for {len(result.history)} epochs; "
          f"best val loss {result.best_val_loss:.6f} at epoch {result.best_epoch}; "
          f"checkpoint at {out_dir / 'checkpoint.tvm'}")
    return EXIT_OK


def _load_model_for_data(model_path: str, resolution: int):
    path = Path(model_path)
    if not path.is_file():
        raise MissingInputError(f"checkpoint not found: {path}")
    state = load_checkpoint(path)
    return build_from_state(state, out_resolution=resolution)


def _single_view(data_arg: str):
    views = _load_views(data_arg)
    return views[0] if len(views) == 1 else concat_views(views)


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    view = _single_view(args.data)
    model = _load_model_for_data(args.model, view.images.shape[2])
    report = evaluate_single_point(model, view, cfg.eval)

    out_dir = Path(args.report)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval_report.csv").write_text(eval_report_csv(report))
    summary = (
        f"single-point evaluation: n={report.n} misses={report.misses}\n"
        f"  R2   x={report.r2[0]:.4f} y={report.r2[1]:.4f} z={report.r2[2]:.4f} avg={report.avg_r2:.4f}\n"
        f"  MAE  x={report.mae_mm[0]:.4f} y={report.mae_mm[1]:.4f} z={report.mae_mm[2]:.4f} avg={report.avg_mae_mm:.4f} mm\n"
        f"  RMSE x={report.rmse_mm[0]:.4f} y={report.rmse_mm[1]:.4f} z={report.rmse_mm[2]:.4f} avg={report.avg_rmse_mm:.4f} mm\n"
    )
    (out_dir / "summary.txt").write_text(summary)
    _write_config_echo(out_dir, cfg, {"command": "eval", "data": args.data, "model": args.model})
    print(summary, end="")
    return EXIT_OK


def cmd_two_point(args) -> int:
    cfg = load_run_config(args.config)
    view = _single_view(args.data)
    model = _load_model_for_data(args.model, view.images.shape[2])
    report = two_point_discrimination(model, view, cfg.eval)

    out_dir = Path(args.report)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "two_point.csv").write_text(two_point_csv(report))
    summary = (
        f"two-point discrimination: samples={report.sample_count} failures={report.failure_count}\n"
        f"  overall distance MAE {report.overall_distance_mae_mm:.4f} mm\n"
        f"  mean position error  {report.mean_position_error_mm:.4f} mm over {report.valid_pair_count} pairs\n"
        f"  depth MAE            {report.depth_mae_mm:.4f} mm\n"
    )
    (out_dir / "summary.txt").write_text(summary)
    _write_config_echo(out_dir, cfg, {"command": "two-point", "data": args.data, "model": args.model})
    print(summary, end="")
    return EXIT_OK


def cmd_multi_contact(args) -> int:
    cfg = load_run_config(args.config)
    view = _single_view(args.data)
    model = _load_model_for_data(args.model, view.images.shape[2])
    reports = multi_contact_eval(model, view, cfg.eval)

    out_dir = Path(args.report)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "multi_contact.csv").write_text(multi_contact_csv(reports))
    lines = ["multi-contact evaluation:"]
    for k in sorted(reports):
        r = reports[k]
        lines.append(
            f"  x{k}: position {r.mean_position_error_mm:.4f} mm, depth {r.depth_mae_mm:.4f} mm, "
            f"pairs={r.matched_pairs} misses={r.misses} fps={r.false_positives} n={r.n_samples}"
        )
    summary = "\n".join(lines) + "\n"
    (out_dir / "summary.txt").write_text(summary)
    _write_config_echo(out_dir, cfg, {"command": "multi-contact", "data": args.data, "model": args.model})
    print(summary, end="")
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = load_run_config(args.config)
    image_path = Path(args.image)
    if not image_path.is_file():
        raise MissingInputError(f"image not found: {image_path}")
    arr = load_tensor(image_path)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"expected a 2-d or 3-d image tensor, got shape {arr.shape}")
    res = cfg.model.out_resolution
    if arr.shape[1] != res or arr.shape[2] != res:
        raise ShapeError(f"image resolution {arr.shape[1]}x{arr.shape[2]} does not match the {res}x{res} pipeline")
    mapping = GridMapping(resolution=res)

    if args.model == "passthrough":
        if arr.shape[0] != 1:
            raise ShapeError(f"passthrough expects a single-channel heatmap, got {arr.shape[0]} channels")
        peaks = extract_peaks(
            HeatmapGrid(arr[0], mapping),
            tau=cfg.eval.tau,
            footprint=cfg.eval.footprint,
            min_sep_px=cfg.eval.min_sep_px,
            d_max_mm=cfg.kernel.d_max_mm,
        )
    else:
        from .training import predict_contacts

        model = _load_model_for_data(args.model, res)
        peaks = predict_contacts(model, arr, mapping, cfg.eval, cfg.kernel.d_max_mm)

    Path(args.out).write_text(format_peaks_csv(peaks))
    print(f"{len(peaks)} peak(s) -> {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.op == "all":
        ops = sorted(OP_CHECKS)
    elif args.op in OP_CHECKS:
        ops = [args.op]
    else:
        raise DomainError(f"unknown op {args.op!r}; known: {sorted(OP_CHECKS)} or 'all'")
    seed = args.seed if args.seed is not None else 0
    bias = 1e-2 if args.corrupt else 0.0
    failed = []
    for op in ops:
        worst = run_op_suite(op, instances=args.instances, seed=seed, grad_bias=bias)
        ok = worst <= args.tol
        if not ok:
            failed.append(op)
        print(f"{op:<24} max_rel_err={worst:.3e}  {'PASS' if ok else 'FAIL'}")
    if failed:
        print(f"{len(failed)}/{len(ops)} ops failed at tol {args.tol:g}: {', '.join(failed)}")
        return EXIT_ERROR
    print(f"all {len(ops)} ops within tol {args.tol:g}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE_MISMATCH
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT_CORRUPTION
    except TouchmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
