#!/usr/bin/env python3
"""End-to-end LOL reproduction: train at the default protocol, evaluate on
the test split, and run the relay-instability contrast.

Prints one PASS/FAIL line per release gate that depends on the dataset
(training reproduction, instability contrast, dataset contract) and writes
model.json + eval.json to --out-dir. Exit code 0 iff every gate passed.

    python scripts/run_lol_experiment.py --data-root data/LOL --out-dir runs/lol

Expect roughly 20 minutes on a single CPU core for the training gate at
the full 485-pair, 400x600 scale.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import retinalight as rl  # noqa: E402

SSIM_BAND = (0.25, 0.50)


def gate(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def instability_contrast(test_set) -> tuple[bool, str]:
    kernel = rl.gaussian_kernel(rl.GaussianSpec(1.0, 3))
    recursive_cfg = rl.VariantConfig(alpha=0.01, variant="recursive")
    residual_ok = True
    recursive_max = 0.0
    for pair in test_set:
        low, _ = rl.load_pair(pair)
        for plane in rl.split_channels(low):
            smoothed = rl.conv2d_same(plane, kernel, "replicate")
            residual = rl.bc_residual(plane, smoothed)
            if residual.data.min() < 0.0 or residual.data.max() > 2.0:
                residual_ok = False
            divided = rl.bc_recursive(plane, smoothed, recursive_cfg)
            recursive_max = max(recursive_max, float(divided.data.max()))
    ok = residual_ok and recursive_max > 2.0
    return ok, (
        f"residual stayed in [0,2]: {residual_ok}, "
        f"divisive max pre-clamp: {recursive_max:.2f} (needs > 2)"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-root", required=True)
    parser.add_argument("--out-dir", default="runs/lol")
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--lr", type=float, default=0.001)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--preload", action="store_true",
                        help="decode all pairs up front (~3 GB for full-size LOL)")
    parser.add_argument("--skip-train", action="store_true",
                        help="reuse <out-dir>/model.json instead of training")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set = rl.discover(args.data_root, "train")
    test_set = rl.discover(args.data_root, "test")
    print(f"discovered {len(train_set)} train pairs, {len(test_set)} test pairs")

    all_ok = True
    sizes = set()
    for dataset in (train_set, test_set):
        for pair in dataset:
            low, high = rl.load_pair(pair)
            sizes.add(low.data.shape)
            sizes.add(high.data.shape)
    all_ok &= gate(
        "dataset contract",
        len(train_set) == 485 and len(test_set) == 15 and sizes == {(400, 600, 3)},
        f"{len(train_set)}/{len(test_set)} pairs, image shapes {sorted(sizes)}",
    )

    cfg = rl.TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, seed=args.seed,
    )
    model_path = out_dir / "model.json"
    if args.skip_train:
        model = rl.load_checkpoint(model_path.read_bytes())
        history = None
        print(f"loaded existing checkpoint {model_path}")
    else:
        start = time.perf_counter()
        model, history = rl.train(
            train_set, cfg, rl.init_model(cfg.seed),
            preload=args.preload, log_fn=print,
        )
        print(f"training took {time.perf_counter() - start:.0f}s")
        metadata = dict(model.metadata)
        metadata.update(cfg.summary())
        metadata["final_mean_loss"] = history[-1]
        model_path.write_bytes(rl.save_checkpoint(model, metadata))
        print(f"wrote {model_path}")

    report = rl.evaluate(model, test_set)
    baseline = float(np.mean([rl.ssim(*rl.load_pair(p)) for p in test_set]))
    (out_dir / "eval.json").write_text(report.to_json())
    print(report.table())
    print(f"unenhanced baseline mean ssim: {baseline:.4f}")

    sample_low, _ = rl.load_pair(test_set.pairs[0])
    sample_out = rl.forward(model, sample_low)[0].clamped()
    print(
        f"sample enhancement {test_set.pairs[0].name}: mean intensity "
        f"{float(sample_low.data.mean()):.4f} -> {float(sample_out.data.mean()):.4f}"
    )

    detail = (
        f"mean ssim {report.mean_ssim:.4f} in [{SSIM_BAND[0]}, {SSIM_BAND[1]}], "
        f"baseline {baseline:.4f}"
    )
    band_ok = SSIM_BAND[0] <= report.mean_ssim <= SSIM_BAND[1]
    improves = report.mean_ssim > baseline
    loss_ok = history is None or history[-1] < history[0]
    if history is not None:
        detail += f", loss {history[0]:.5f} -> {history[-1]:.5f}"
    all_ok &= gate("training reproduction", band_ok and improves and loss_ok, detail)

    ok, detail = instability_contrast(test_set)
    all_ok &= gate("instability contrast", ok, detail)

    return 0 if all_ok else 2


if __name__ == "__main__":
    sys.exit(main())
