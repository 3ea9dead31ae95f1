#!/usr/bin/env python3
"""Generate a synthetic paired low/normal-light dataset in the LOL layout.

Useful for exercising the full train/eval pipeline when the real dataset is
not available. Scenes are smooth random color fields; the low-light
counterparts are gain-reduced, noisy, and sprinkled with isolated hot
pixels (so the divisive-relay instability is reproducible on them too).

    python scripts/make_synthetic_lol.py --root data/synthetic_lol \
        --train 485 --test 15 --height 400 --width 600
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from retinalight.image import ImageTensor, write_png  # noqa: E402


def make_scene(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    cell = max(4, min(height, width) // 12)
    grid = rng.random(((height + cell - 1) // cell + 2, (width + cell - 1) // cell + 2))
    coarse = np.kron(grid, np.ones((cell, cell)))[:height, :width]
    for _ in range(3):
        padded = np.pad(coarse, 1, mode="edge")
        coarse = (
            padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2]
            + padded[1:-1, 2:] + padded[1:-1, 1:-1]
        ) / 5.0
    tint = rng.uniform(0.7, 1.0, 3)
    scene = coarse[:, :, np.newaxis] * tint[np.newaxis, np.newaxis, :]
    return 0.2 + 0.75 * np.clip(scene, 0.0, 1.0)


def make_low_light(rng: np.random.Generator, high: np.ndarray) -> np.ndarray:
    gain = rng.uniform(0.12, 0.24)
    low = high * gain + rng.normal(0.0, 0.01, high.shape)
    n_hot = max(1, int(0.0005 * high.shape[0] * high.shape[1]))
    ys = rng.integers(0, high.shape[0], n_hot)
    xs = rng.integers(0, high.shape[1], n_hot)
    low[ys, xs, :] = rng.uniform(0.5, 0.9, (n_hot, 1))
    return np.clip(low, 0.0, 1.0)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", required=True, help="output dataset root")
    parser.add_argument("--train", type=int, default=485)
    parser.add_argument("--test", type=int, default=15)
    parser.add_argument("--height", type=int, default=400)
    parser.add_argument("--width", type=int, default=600)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    root = Path(args.root)
    for split_dir, count in (("our485", args.train), ("eval15", args.test)):
        low_dir = root / split_dir / "low"
        high_dir = root / split_dir / "high"
        low_dir.mkdir(parents=True, exist_ok=True)
        high_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            high = make_scene(rng, args.height, args.width)
            low = make_low_light(rng, high)
            write_png(high_dir / f"{i:03d}.png", ImageTensor(high.astype(np.float32)))
            write_png(low_dir / f"{i:03d}.png", ImageTensor(low.astype(np.float32)))
        print(f"wrote {count} pairs under {root / split_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
