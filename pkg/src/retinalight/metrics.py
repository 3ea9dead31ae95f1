"""SSIM and PSNR for scoring restored images against ground truth.

SSIM follows the common convention: 11x11 Gaussian window with sigma 1.5,
C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1, population (weighted) second
moments, evaluated only where the window fits entirely inside the image
(the valid region), averaged over that region and then over channels.
Inputs are clamped to [0, 1] before scoring, matching what an 8-bit encode
of the result would show.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataio import PairedDataset, load_pair
from .errors import DataError, InvalidInputError
from .image import ImageTensor
from .model import RetinaModel, forward

SSIM_WINDOW_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _window_1d() -> np.ndarray:
    offsets = np.arange(SSIM_WINDOW_SIZE, dtype=np.float64) - (SSIM_WINDOW_SIZE - 1) / 2.0
    w = np.exp(-(offsets**2) / (2.0 * SSIM_SIGMA**2))
    return w / w.sum()


_WINDOW_1D = _window_1d()


def _window_mean(plane: np.ndarray) -> np.ndarray:
    """Gaussian-weighted window means over the valid region (separable pass)."""
    rows = sliding_window_view(plane, SSIM_WINDOW_SIZE, axis=0) @ _WINDOW_1D
    return sliding_window_view(rows, SSIM_WINDOW_SIZE, axis=1) @ _WINDOW_1D


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    """Structural similarity in [-1, 1]; 1.0 exactly for identical images."""
    if a.data.shape != b.data.shape:
        raise InvalidInputError(
            f"image shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    if a.height < SSIM_WINDOW_SIZE or a.width < SSIM_WINDOW_SIZE:
        raise InvalidInputError(
            f"images must be at least {SSIM_WINDOW_SIZE}x{SSIM_WINDOW_SIZE}, "
            f"got {a.height}x{a.width}"
        )
    x_all = np.clip(a.data.astype(np.float64), 0.0, 1.0)
    y_all = np.clip(b.data.astype(np.float64), 0.0, 1.0)
    channel_means = []
    for c in range(a.channels):
        x = x_all[:, :, c]
        y = y_all[:, :, c]
        mu_x = _window_mean(x)
        mu_y = _window_mean(y)
        var_x = _window_mean(x * x) - mu_x * mu_x
        var_y = _window_mean(y * y) - mu_y * mu_y
        cov = _window_mean(x * y) - mu_x * mu_y
        numerator = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
        denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
        channel_means.append(np.mean(numerator / denominator))
    return float(np.mean(channel_means))


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; +inf for identical images."""
    if a.data.shape != b.data.shape:
        raise InvalidInputError(
            f"image shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


@dataclass(frozen=True)
class ImageScore:
    name: str
    ssim: float
    psnr: float


@dataclass
class EvalReport:
    """Per-image and aggregate scores for one test split."""

    per_image: list[ImageScore]
    mean_ssim: float
    mean_psnr: float

    def table(self) -> str:
        name_width = max([len(s.name) for s in self.per_image] + [len("image")])
        lines = [f"{'image':<{name_width}}  {'ssim':>8}  {'psnr_db':>9}"]
        for s in self.per_image:
            lines.append(f"{s.name:<{name_width}}  {s.ssim:8.4f}  {_fmt_psnr(s.psnr):>9}")
        lines.append(
            f"{'mean':<{name_width}}  {self.mean_ssim:8.4f}  {_fmt_psnr(self.mean_psnr):>9}"
        )
        return "\n".join(lines)

    def to_json(self) -> str:
        doc = {
            "per_image": [
                {"name": s.name, "ssim": s.ssim, "psnr": _json_psnr(s.psnr)}
                for s in self.per_image
            ],
            "mean_ssim": self.mean_ssim,
            "mean_psnr": _json_psnr(self.mean_psnr),
        }
        return json.dumps(doc, indent=2) + "\n"


def _fmt_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:9.4f}".strip()


def _json_psnr(value: float):
    return "inf" if math.isinf(value) else value


def evaluate(model: RetinaModel, test_pairs: PairedDataset) -> EvalReport:
    """Enhance every low image, clamp, and score against its ground truth."""
    if len(test_pairs) == 0:
        raise DataError("cannot evaluate an empty test set")
    scores = []
    for pair in test_pairs:
        low, high = load_pair(pair)
        enhanced = forward(model, low)[0].clamped()
        scores.append(ImageScore(pair.name, ssim(enhanced, high), psnr(enhanced, high)))
    mean_ssim = float(np.mean([s.ssim for s in scores]))
    mean_psnr = float(np.mean([s.psnr for s in scores]))
    return EvalReport(scores, mean_ssim, mean_psnr)
