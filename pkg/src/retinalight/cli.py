"""Command-line interface.

Subcommands: train, enhance, eval, kernels, compare, gradcheck. Exit codes
are a stable contract for scripting: 0 success, 1 usage, 2 I/O or data
problem, 3 numeric abort, 4 failed self-check. Human-readable output goes
to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import discover
from .errors import (
    CheckFailureError,
    CheckpointFormatError,
    DataError,
    DataPairingError,
    DatasetLayoutError,
    ImageDecodeError,
    InvalidParameterError,
    NumericError,
    RetinaLightError,
    UnsupportedFormatError,
    UsageError,
)
from .image import ImageTensor, merge_channels, read_png, split_channels, write_png
from .kernels import GaussianSpec, conv2d_same, gaussian_kernel
from .metrics import evaluate
from .model import (
    VariantConfig,
    bc_fir,
    bc_recursive,
    bc_residual,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .training import TrainConfig, grad_check, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

GRADCHECK_THRESHOLD = 1e-5

_DATA_ERRORS = (
    ImageDecodeError,
    UnsupportedFormatError,
    CheckpointFormatError,
    DatasetLayoutError,
    DataPairingError,
    DataError,
    OSError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1, not argparse's default 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="retinalight", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a paired dataset")
    p_train.add_argument("--data-root", required=True, help="dataset root (our485/eval15 layout)")
    p_train.add_argument("--low-dir", help="override the low-light image directory")
    p_train.add_argument("--high-dir", help="override the ground-truth image directory")
    p_train.add_argument("--epochs", type=int, default=20)
    p_train.add_argument("--batch-size", type=int, default=8)
    p_train.add_argument("--lr", type=float, default=0.001)
    p_train.add_argument("--seed", type=int, default=42)
    p_train.add_argument("--sigma-g", type=float, default=1.0,
                         help="Gaussian init sigma for the smoothing stage (stage_g)")
    p_train.add_argument("--sigma1", type=float, default=0.5,
                         help="DoG center sigma for the opponent stage (stage_f)")
    p_train.add_argument("--sigma2", type=float, default=1.0,
                         help="DoG surround sigma for the opponent stage (stage_f)")
    p_train.add_argument("--out", default="model.json", help="checkpoint output path")
    p_train.add_argument("--preload", action="store_true",
                         help="decode the whole dataset up front (more RAM, fewer decodes)")
    p_train.add_argument("--save-every-epoch", action="store_true",
                         help="also write <out>.epoch<i>.json after each epoch")

    p_enh = sub.add_parser("enhance", help="enhance one PNG with a trained model")
    p_enh.add_argument("--model", required=True)
    p_enh.add_argument("--input", required=True)
    p_enh.add_argument("--output", required=True)

    p_eval = sub.add_parser("eval", help="score a model on the test split")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data-root", required=True)
    p_eval.add_argument("--low-dir", help="override the low-light image directory")
    p_eval.add_argument("--high-dir", help="override the ground-truth image directory")
    p_eval.add_argument("--json", metavar="PATH",
                        help="write the report as JSON to PATH ('-' prints JSON instead of the table)")

    p_ker = sub.add_parser("kernels", help="export kernel heatmaps and raw weights")
    p_ker.add_argument("--model", required=True)
    p_ker.add_argument("--out-dir", required=True)

    p_cmp = sub.add_parser("compare", help="run one bipolar-cell relay variant on a PNG")
    p_cmp.add_argument("--input", required=True)
    p_cmp.add_argument("--variant", choices=["recursive", "fir", "residual"], required=True)
    p_cmp.add_argument("--alpha", type=float, default=1.0)
    p_cmp.add_argument("--beta", type=float, default=1.0)
    p_cmp.add_argument("--sigma", type=float, default=1.0,
                       help="sigma of the 3x3 Gaussian smoothing used before the variant")
    p_cmp.add_argument("--output", help="write the clamped result PNG here")
    p_cmp.add_argument("--stats", action="store_true",
                       help="print min/max/mean of the pre-clamp result")

    p_gc = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--corrupt", action="store_true",
                      help=argparse.SUPPRESS)  # negative control: force a failure

    return parser


def _cmd_train(args) -> int:
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
    )
    model = init_model(args.seed, args.sigma_g, args.sigma1, args.sigma2)
    dataset = discover(args.data_root, "train", args.low_dir, args.high_dir)
    out_path = Path(args.out)
    metadata = dict(model.metadata)
    metadata.update(cfg.summary())

    def _save_epoch(epoch, epoch_model, mean_loss):
        if args.save_every_epoch:
            doc = dict(metadata)
            doc["epoch"] = epoch
            doc["mean_loss"] = mean_loss
            Path(f"{out_path}.epoch{epoch}.json").write_bytes(
                save_checkpoint(epoch_model, doc)
            )

    trained, history = train(
        dataset, cfg, model, preload=args.preload, log_fn=print, epoch_callback=_save_epoch
    )
    metadata["final_mean_loss"] = history[-1]
    out_path.write_bytes(save_checkpoint(trained, metadata))
    print(f"wrote checkpoint {out_path}")
    return EXIT_OK


def _cmd_enhance(args) -> int:
    model = load_checkpoint(Path(args.model).read_bytes())
    img = read_png(args.input)
    enhanced = forward(model, img)[0].clamped()
    write_png(args.output, enhanced)
    print(
        f"wrote {args.output} "
        f"(mean intensity {float(img.data.mean()):.4f} -> {float(enhanced.data.mean()):.4f})"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = load_checkpoint(Path(args.model).read_bytes())
    dataset = discover(args.data_root, "test", args.low_dir, args.high_dir)
    report = evaluate(model, dataset)
    if args.json == "-":
        sys.stdout.write(report.to_json())
    else:
        print(report.table())
        if args.json:
            Path(args.json).write_text(report.to_json())
    return EXIT_OK


def _heatmap(kernel: np.ndarray, upscale: int = 32) -> ImageTensor:
    lo, hi = float(kernel.min()), float(kernel.max())
    normalized = (kernel - lo) / (hi - lo) if hi > lo else np.full_like(kernel, 0.5)
    big = np.repeat(np.repeat(normalized, upscale, axis=0), upscale, axis=1)
    return ImageTensor(big.astype(np.float32))


def _cmd_kernels(args) -> int:
    model = load_checkpoint(Path(args.model).read_bytes())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stages = [("stage_g", model.smooth), ("stage_f", model.opponent)]
    for stage_name, stage in stages:
        for c in range(3):
            write_png(out_dir / f"{stage_name}_ch{c}.png", _heatmap(stage.kernels[c]))
    dump = {
        name: {
            "kernel_size": stage.kernel_size,
            "kernels": [[float(v) for v in k.ravel()] for k in stage.kernels],
            "biases": [float(b) for b in stage.biases],
        }
        for name, stage in stages
    }
    (out_dir / "kernels.json").write_text(json.dumps(dump, indent=2) + "\n")
    print(f"wrote 6 heatmaps and kernels.json to {out_dir}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    img = read_png(args.input)
    cfg = VariantConfig(alpha=args.alpha, beta=args.beta, variant=args.variant)
    kernel = gaussian_kernel(GaussianSpec(args.sigma, 3))
    planes = split_channels(img)
    results = []
    for plane in planes:
        smoothed = conv2d_same(plane, kernel, "replicate")
        if args.variant == "recursive":
            results.append(bc_recursive(plane, smoothed, cfg))
        elif args.variant == "fir":
            results.append(bc_fir(plane, smoothed, cfg))
        else:
            results.append(bc_residual(plane, smoothed))
    merged = merge_channels(results)
    if args.stats:
        data = merged.data
        print(
            f"variant={args.variant} alpha={args.alpha} beta={args.beta} "
            f"sigma={args.sigma} pre_clamp_min={float(data.min()):.6g} "
            f"pre_clamp_max={float(data.max()):.6g} pre_clamp_mean={float(data.mean()):.6g}"
        )
    if args.output:
        write_png(args.output, merged.clamped())
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    model = init_model(args.seed)
    model.smooth.kernels += rng.normal(0.0, 0.05, model.smooth.kernels.shape).astype(np.float32)
    model.smooth.biases += rng.normal(0.0, 0.02, model.smooth.biases.shape).astype(np.float32)
    model.opponent.kernels += rng.normal(0.0, 0.05, model.opponent.kernels.shape).astype(np.float32)
    model.opponent.biases += rng.normal(0.0, 0.02, model.opponent.biases.shape).astype(np.float32)
    img = ImageTensor(rng.random((8, 8, 3), np.float64))
    target = ImageTensor(rng.random((8, 8, 3), np.float64))
    report = grad_check(model, img, target, corruption=1e-3 if args.corrupt else 0.0)
    for group, worst in report.group_max().items():
        print(f"group={group} max_rel_error={worst:.3e}")
    print(
        f"parameters_checked={len(report.entries)} "
        f"max_rel_error={report.max_rel_error:.3e} threshold={GRADCHECK_THRESHOLD:.0e}"
    )
    if report.max_rel_error >= GRADCHECK_THRESHOLD:
        worst = report.worst
        raise CheckFailureError(
            f"gradient check failed: {worst.group}{list(worst.index)} "
            f"analytic={worst.analytic:.6e} numeric={worst.numeric:.6e} "
            f"rel_error={worst.rel_error:.3e}"
        )
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "enhance": _cmd_enhance,
    "eval": _cmd_eval,
    "kernels": _cmd_kernels,
    "compare": _cmd_compare,
    "gradcheck": _cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (UsageError, InvalidParameterError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailureError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RetinaLightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
