"""Shared fixtures: an independent minimal PNG writer (used as the decode
oracle), a synthetic paired-dataset generator, detection of a real LOL root,
and a summary hook that prints one line per acceptance check."""

import os
import re
import struct
import zlib
from pathlib import Path

import numpy as np
import pytest


# ---------------------------------------------------------------------------
# Independent PNG writer (filter 0 only). Deliberately not built on the
# package or on cv2 so decode tests have a second opinion.

def _chunk(typ: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + typ
        + payload
        + struct.pack(">I", zlib.crc32(typ + payload) & 0xFFFFFFFF)
    )


def build_png(array: np.ndarray, bitdepth: int = 8, palette: bytes | None = None) -> bytes:
    """Write a PNG from a (H, W) or (H, W, C) integer array, C in {1,2,3,4}.

    C=2 is gray+alpha, C=4 is RGBA. With ``palette`` the array must be
    (H, W) of indices and colortype 3 is written.
    """
    if array.ndim == 2:
        array = array[:, :, np.newaxis]
    height, width, channels = array.shape
    if palette is not None:
        colortype = 3
    else:
        colortype = {1: 0, 2: 4, 3: 2, 4: 6}[channels]
    ihdr = struct.pack(">IIBBBBB", width, height, bitdepth, colortype, 0, 0, 0)
    dtype = ">u2" if bitdepth == 16 else np.uint8
    rows = b"".join(b"\x00" + array[y].astype(dtype).tobytes() for y in range(height))
    out = b"\x89PNG\r\n\x1a\n" + _chunk(b"IHDR", ihdr)
    if palette is not None:
        out += _chunk(b"PLTE", palette)
    return out + _chunk(b"IDAT", zlib.compress(rows)) + _chunk(b"IEND", b"")


@pytest.fixture
def png_builder():
    return build_png


# ---------------------------------------------------------------------------
# Synthetic paired low/normal-light data in the LOL directory layout.

def make_scene(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Smooth random RGB scene with values comfortably inside [0.2, 0.95]."""
    cell = 8
    grid = rng.random(((height + cell - 1) // cell + 2, (width + cell - 1) // cell + 2))
    coarse = np.kron(grid, np.ones((cell, cell)))[:height, :width]
    for _ in range(2):
        padded = np.pad(coarse, 1, mode="edge")
        coarse = (
            padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2]
            + padded[1:-1, 2:] + padded[1:-1, 1:-1]
        ) / 5.0
    tint = rng.uniform(0.7, 1.0, 3)
    scene = coarse[:, :, np.newaxis] * tint[np.newaxis, np.newaxis, :]
    return 0.2 + 0.75 * np.clip(scene, 0.0, 1.0)


def make_low_light(
    rng: np.random.Generator, high: np.ndarray, gain: float = 0.18, speckle: float = 0.003
) -> np.ndarray:
    """Darkened counterpart with sensor noise and isolated hot pixels."""
    low = high * gain + rng.normal(0.0, 0.01, high.shape)
    n_hot = max(1, int(speckle * high.shape[0] * high.shape[1]))
    ys = rng.integers(0, high.shape[0], n_hot)
    xs = rng.integers(0, high.shape[1], n_hot)
    low[ys, xs, :] = rng.uniform(0.5, 0.9, (n_hot, 1))
    return np.clip(low, 0.0, 1.0)


def _to_png8(img: np.ndarray) -> bytes:
    return build_png(np.floor(np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8))


def make_lol_tree(
    root: Path, n_train: int, n_test: int, height: int = 48, width: int = 64, seed: int = 0
) -> Path:
    rng = np.random.default_rng(seed)
    for split_dir, count in (("our485", n_train), ("eval15", n_test)):
        low_dir = root / split_dir / "low"
        high_dir = root / split_dir / "high"
        low_dir.mkdir(parents=True)
        high_dir.mkdir(parents=True)
        for i in range(count):
            high = make_scene(rng, height, width)
            low = make_low_light(rng, high)
            (high_dir / f"{i:03d}.png").write_bytes(_to_png8(high))
            (low_dir / f"{i:03d}.png").write_bytes(_to_png8(low))
    return root


@pytest.fixture(scope="session")
def synthetic_lol(tmp_path_factory) -> Path:
    """Small LOL-layout corpus: 12 train pairs, 4 test pairs, 48x64."""
    return make_lol_tree(tmp_path_factory.mktemp("synlol"), 12, 4)


# ---------------------------------------------------------------------------
# Real LOL dataset, if available.

def find_lol_root() -> Path | None:
    candidates = []
    env = os.environ.get("RETINALIGHT_LOL_ROOT")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "LOL")
    for root in candidates:
        if (root / "our485" / "low").is_dir() and (root / "eval15" / "low").is_dir():
            return root
    return None


@pytest.fixture(scope="session")
def lol_root() -> Path:
    root = find_lol_root()
    if root is None:
        pytest.skip(
            "real LOL dataset not present (set RETINALIGHT_LOL_ROOT or place it "
            "under data/LOL); the synthetic-data analogue tests cover this path"
        )
    return root


# ---------------------------------------------------------------------------
# Acceptance summary: one line per acceptance check at the end of the run.

_CRITERION_RE = re.compile(r"test_(criterion_\d+[a-z]?|analogue_\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status, word in (("passed", "PASS"), ("failed", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance.py" not in rep.nodeid:
                continue
            if status in ("passed", "failed") and rep.when != "call":
                continue
            name = rep.nodeid.split("::")[-1]
            match = _CRITERION_RE.match(name)
            if not match:
                continue
            label = name.removeprefix("test_").replace("_", " ")
            reason = ""
            if status == "skipped" and isinstance(rep.longrepr, tuple):
                reason = f"  ({rep.longrepr[2].removeprefix('Skipped: ')})"
            lines.append(f"{word}  {label}{reason}")
    if lines:
        terminalreporter.write_sep("-", "acceptance summary")
        for line in sorted(lines, key=lambda s: s.split(None, 1)[1]):
            terminalreporter.write_line(line)
