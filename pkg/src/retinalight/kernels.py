"""Gaussian / difference-of-Gaussians kernels and the depthwise 2-D
convolution primitive with its exact adjoints.

Orientation convention: all "convolutions" here are correlations (no
kernel flip), applied consistently in the forward and backward passes.
Output size always equals input size; out-of-range reads are resolved by
the padding mode, either ``replicate`` (default: border pixels extend
outward, so a normalized non-negative kernel maps [0,1] into [0,1]) or
``zero``.

The backward pass is the exact adjoint of the padded correlation. For
replicate padding this means boundary contributions are folded back onto
the edge pixels they were read from, which is what makes finite-difference
checks pass at machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError, InvalidParameterError
from .image import ImageTensor

PaddingMode = Literal["replicate", "zero"]

_NUMPY_PAD_MODE = {"replicate": "edge", "zero": "constant"}


@dataclass(frozen=True)
class GaussianSpec:
    """Sampled isotropic Gaussian: standard deviation in pixels and odd side length."""

    sigma: float
    size: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidParameterError(f"sigma must be finite and > 0, got {self.sigma}")
        if self.size < 1 or self.size % 2 == 0:
            raise InvalidParameterError(f"kernel size must be odd and >= 1, got {self.size}")


def gaussian_kernel(spec: GaussianSpec) -> np.ndarray:
    """Normalized sampled Gaussian, shape (size, size), weights summing to 1.

    weights[i, j] is proportional to exp(-((i-c)^2 + (j-c)^2) / (2 sigma^2))
    with c the center index, so the kernel is 4-fold symmetric with its
    maximum at the center.
    """
    offsets = np.arange(spec.size, dtype=np.float64) - (spec.size - 1) / 2.0
    dist2 = offsets[:, np.newaxis] ** 2 + offsets[np.newaxis, :] ** 2
    weights = np.exp(-dist2 / (2.0 * spec.sigma**2))
    return weights / weights.sum()


def dog_kernel(sigma1: float, sigma2: float, size: int) -> np.ndarray:
    """Difference of two normalized Gaussians of the same support.

    Both components sum to 1, so the difference sums to 0. With
    sigma1 < sigma2 (narrow center minus wide surround) the center weight
    is positive and the far surround negative.
    """
    return gaussian_kernel(GaussianSpec(sigma1, size)) - gaussian_kernel(
        GaussianSpec(sigma2, size)
    )


def _check_kernel(kernel: np.ndarray) -> np.ndarray:
    kernel = np.asarray(kernel)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise InvalidInputError(f"kernel must be square 2-D, got shape {kernel.shape}")
    if kernel.shape[0] % 2 == 0:
        raise InvalidInputError(f"kernel side must be odd, got {kernel.shape[0]}")
    return kernel


def _check_padding(padding: str) -> str:
    if padding not in _NUMPY_PAD_MODE:
        raise InvalidParameterError(f"padding must be 'replicate' or 'zero', got {padding!r}")
    return padding


def _pad(plane: np.ndarray, margin: int, padding: str) -> np.ndarray:
    if margin == 0:
        return plane
    return np.pad(plane, margin, mode=_NUMPY_PAD_MODE[padding])


def _correlate_valid(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-region correlation via a window matrix-vector product."""
    windows = sliding_window_view(arr, kernel.shape)
    h, w = windows.shape[:2]
    flat = windows.reshape(h * w, kernel.size)
    return (flat @ kernel.ravel()).reshape(h, w)


def correlate_same(plane: np.ndarray, kernel: np.ndarray, padding: str) -> np.ndarray:
    """Raw-array core of conv2d_same: same-size padded correlation."""
    margin = (kernel.shape[0] - 1) // 2
    return _correlate_valid(_pad(plane, margin, padding), kernel)


def correlate_grad_kernel(
    plane: np.ndarray, kernel_size: int, upstream: np.ndarray, padding: str
) -> np.ndarray:
    """d(loss)/d(kernel) of correlate_same: correlate the padded input with
    the upstream gradient."""
    margin = (kernel_size - 1) // 2
    return _correlate_valid(_pad(plane, margin, padding), upstream)


def correlate_grad_input(
    kernel: np.ndarray, upstream: np.ndarray, padding: str
) -> np.ndarray:
    """d(loss)/d(input) of correlate_same: the adjoint of the padded correlation.

    First scatters the upstream gradient back onto the padded plane (a full
    correlation with the 180-degree-rotated kernel), then resolves the pad
    margins: discarded for zero padding, folded onto the edge rows/columns
    for replicate padding. The fold is separable because the replicate read
    index clamps rows and columns independently.
    """
    size = kernel.shape[0]
    margin = (size - 1) // 2
    height, width = upstream.shape
    padded_up = np.pad(upstream, size - 1, mode="constant")
    grad_padded = _correlate_valid(padded_up, kernel[::-1, ::-1])
    if margin == 0:
        return grad_padded
    if padding == "zero":
        return grad_padded[margin : margin + height, margin : margin + width].copy()
    grad_padded[margin] += grad_padded[:margin].sum(axis=0)
    grad_padded[margin + height - 1] += grad_padded[margin + height :].sum(axis=0)
    rows = grad_padded[margin : margin + height]
    rows[:, margin] += rows[:, :margin].sum(axis=1)
    rows[:, margin + width - 1] += rows[:, margin + width :].sum(axis=1)
    return rows[:, margin : margin + width].copy()


def conv2d_same(
    plane: ImageTensor, kernel: np.ndarray, padding: PaddingMode = "replicate"
) -> ImageTensor:
    """Same-size correlation of a single-channel image with a square odd kernel.

    out(x, y) = sum_{i,j} plane(x+i-c, y+j-c) * kernel(i, j), with
    out-of-range reads resolved by the padding mode.
    """
    if plane.channels != 1:
        raise InvalidInputError(f"conv2d_same expects 1 channel, got {plane.channels}")
    kernel = _check_kernel(kernel)
    _check_padding(padding)
    return ImageTensor(correlate_same(plane.plane(0), kernel, padding))


def conv2d_backward(
    plane: ImageTensor,
    kernel: np.ndarray,
    upstream_grad: ImageTensor,
    padding: PaddingMode = "replicate",
) -> tuple[ImageTensor, np.ndarray]:
    """Exact gradients of conv2d_same with respect to its input and kernel.

    Returns (grad_wrt_input, grad_wrt_kernel) for the scalar loss whose
    gradient at the convolution output is ``upstream_grad``.
    """
    if plane.channels != 1 or upstream_grad.channels != 1:
        raise InvalidInputError("conv2d_backward expects single-channel images")
    kernel = _check_kernel(kernel)
    _check_padding(padding)
    if upstream_grad.data.shape != plane.data.shape:
        raise InvalidInputError(
            f"upstream gradient shape {upstream_grad.data.shape} does not match "
            f"plane shape {plane.data.shape}"
        )
    up = upstream_grad.plane(0)
    grad_kernel = correlate_grad_kernel(plane.plane(0), kernel.shape[0], up, padding)
    grad_input = correlate_grad_input(kernel, up, padding)
    return ImageTensor(grad_input), grad_kernel
