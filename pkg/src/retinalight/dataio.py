"""Paired low/normal-light dataset discovery and loading.

The default on-disk layout is the published LOL structure:

    <root>/our485/low/*.png   <root>/our485/high/*.png    (train split)
    <root>/eval15/low/*.png   <root>/eval15/high/*.png    (test split)

Pairs are matched by identical filename and ordered lexicographically, so
discovery is deterministic for a given directory state. Decoding is lazy:
discover() touches only filenames, load_pair() decodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, DataPairingError, DatasetLayoutError
from .image import ImageTensor, read_png

SPLIT_DIRS = {"train": "our485", "test": "eval15"}


@dataclass(frozen=True)
class ImagePair:
    name: str
    low_path: Path
    high_path: Path


@dataclass(frozen=True)
class PairedDataset:
    pairs: tuple[ImagePair, ...]
    root: Path
    split: str

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def _png_names(directory: Path) -> set[str]:
    return {p.name for p in directory.iterdir() if p.is_file() and p.suffix.lower() == ".png"}


def discover(
    root: str | Path,
    split: str,
    low_dir: str | Path | None = None,
    high_dir: str | Path | None = None,
) -> PairedDataset:
    """Find low/high pairs for one split.

    ``low_dir``/``high_dir`` override the default layout. Missing
    directories raise DatasetLayoutError; files present on one side only
    raise DataPairingError listing the offenders; zero pairs is allowed but
    warned about.
    """
    root = Path(root)
    if split not in SPLIT_DIRS:
        raise DataError(f"split must be one of {sorted(SPLIT_DIRS)}, got {split!r}")
    low = Path(low_dir) if low_dir is not None else root / SPLIT_DIRS[split] / "low"
    high = Path(high_dir) if high_dir is not None else root / SPLIT_DIRS[split] / "high"
    for directory in (low, high):
        if not directory.is_dir():
            raise DatasetLayoutError(f"missing dataset directory: {directory}")
    low_names = _png_names(low)
    high_names = _png_names(high)
    if low_names != high_names:
        missing_high = sorted(low_names - high_names)
        missing_low = sorted(high_names - low_names)
        parts = []
        if missing_high:
            parts.append(f"low files with no high counterpart: {missing_high[:10]}")
        if missing_low:
            parts.append(f"high files with no low counterpart: {missing_low[:10]}")
        raise DataPairingError("; ".join(parts))
    names = sorted(low_names)
    if not names:
        warnings.warn(f"discovered 0 pairs under {low} / {high}", stacklevel=2)
    pairs = tuple(ImagePair(name, low / name, high / name) for name in names)
    return PairedDataset(pairs, root, split)


def load_pair(pair: ImagePair) -> tuple[ImageTensor, ImageTensor]:
    """Decode both images of a pair at native resolution and check that their
    dimensions agree."""
    try:
        low = read_png(pair.low_path)
        high = read_png(pair.high_path)
    except OSError as exc:
        raise DataError(f"cannot read pair {pair.name!r}: {exc}")
    if low.data.shape != high.data.shape:
        raise DataError(
            f"pair {pair.name!r} is dimension-mismatched: "
            f"low {low.data.shape} vs high {high.data.shape}"
        )
    return low, high
