"""The learnable retina network.

RGB channels are processed independently (depthwise). Per channel the
pipeline is:

    smoothed  = conv(input, smooth_kernel) + smooth_bias     (lateral feedback)
    combined  = input + smoothed                              (residual relay)
    enhanced  = input + conv(combined, opponent_kernel) + opponent_bias

The smoothing stage is initialized as a normalized Gaussian (horizontal-cell
style lateral averaging), the opponent stage as a difference-of-Gaussians
(bipolar-cell style center-surround). Both residual skips make the
zero-parameter model an exact identity, and there is no nonlinearity
anywhere, so the map is affine in the input for fixed weights.

Parameter budget: 3 channels x (3x3 kernel + bias) + 3 channels x
(5x5 kernel + bias) = 30 + 78 = 108 learnable values.

The divisive bipolar-cell variant (input / (alpha + smoothed)) is kept as a
forward-only comparison tool: it can amplify isolated bright pixels on dark
backgrounds without bound, which is exactly the instability the residual
form avoids.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CheckpointFormatError,
    InvalidInputError,
    InvalidParameterError,
    NumericError,
)
from .image import ImageTensor
from .kernels import (
    GaussianSpec,
    PaddingMode,
    _check_padding,
    correlate_grad_input,
    correlate_grad_kernel,
    correlate_same,
    dog_kernel,
    gaussian_kernel,
)

CHANNELS = 3
SMOOTH_KERNEL_SIZE = 3
OPPONENT_KERNEL_SIZE = 5
PARAMETER_COUNT = 108

DEFAULT_SIGMA_SMOOTH = 1.0
DEFAULT_SIGMA_CENTER = 0.5
DEFAULT_SIGMA_SURROUND = 1.0

CHECKPOINT_VERSION = 1

# Wire names of the two stages in checkpoints and diagnostics.
_STAGE_SMOOTH = "stage_g"
_STAGE_OPPONENT = "stage_f"


@dataclass
class StageParams:
    """One depthwise stage: a square kernel and a scalar bias per channel."""

    kernels: np.ndarray  # (3, k, k)
    biases: np.ndarray  # (3,)

    def __post_init__(self) -> None:
        self.kernels = np.asarray(self.kernels)
        self.biases = np.asarray(self.biases)
        if self.kernels.ndim != 3 or self.kernels.shape[0] != CHANNELS:
            raise InvalidParameterError(
                f"stage kernels must have shape (3, k, k), got {self.kernels.shape}"
            )
        size = self.kernels.shape[1]
        if self.kernels.shape[2] != size or size % 2 == 0:
            raise InvalidParameterError(
                f"stage kernels must be square with odd side, got {self.kernels.shape}"
            )
        if self.biases.shape != (CHANNELS,):
            raise InvalidParameterError(
                f"stage biases must have shape (3,), got {self.biases.shape}"
            )

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[1]

    @property
    def num_parameters(self) -> int:
        return self.kernels.size + self.biases.size

    def copy(self) -> "StageParams":
        return StageParams(self.kernels.copy(), self.biases.copy())

    def astype(self, dtype) -> "StageParams":
        return StageParams(self.kernels.astype(dtype), self.biases.astype(dtype))


@dataclass
class RetinaModel:
    """Full learnable parameter set: smoothing stage, opponent stage, padding."""

    smooth: StageParams
    opponent: StageParams
    padding: PaddingMode = "replicate"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.smooth.kernel_size != SMOOTH_KERNEL_SIZE:
            raise InvalidParameterError(
                f"smoothing stage kernel size must be {SMOOTH_KERNEL_SIZE}, "
                f"got {self.smooth.kernel_size}"
            )
        if self.opponent.kernel_size != OPPONENT_KERNEL_SIZE:
            raise InvalidParameterError(
                f"opponent stage kernel size must be {OPPONENT_KERNEL_SIZE}, "
                f"got {self.opponent.kernel_size}"
            )
        _check_padding(self.padding)
        assert self.num_parameters == PARAMETER_COUNT

    @property
    def num_parameters(self) -> int:
        return self.smooth.num_parameters + self.opponent.num_parameters

    def copy(self) -> "RetinaModel":
        return RetinaModel(
            self.smooth.copy(), self.opponent.copy(), self.padding, dict(self.metadata)
        )

    def astype(self, dtype) -> "RetinaModel":
        return RetinaModel(
            self.smooth.astype(dtype),
            self.opponent.astype(dtype),
            self.padding,
            dict(self.metadata),
        )


@dataclass(frozen=True)
class ForwardTape:
    """Intermediates retained by forward() for the backward pass, all (H, W, 3)."""

    inputs: np.ndarray
    smoothed: np.ndarray
    combined: np.ndarray


@dataclass
class ModelGrads:
    """Gradient (or any parameter-shaped vector, e.g. Adam moments)."""

    smooth_kernels: np.ndarray  # (3, 3, 3)
    smooth_biases: np.ndarray  # (3,)
    opponent_kernels: np.ndarray  # (3, 5, 5)
    opponent_biases: np.ndarray  # (3,)

    @classmethod
    def zeros(cls, dtype=np.float32) -> "ModelGrads":
        return cls(
            np.zeros((CHANNELS, SMOOTH_KERNEL_SIZE, SMOOTH_KERNEL_SIZE), dtype),
            np.zeros(CHANNELS, dtype),
            np.zeros((CHANNELS, OPPONENT_KERNEL_SIZE, OPPONENT_KERNEL_SIZE), dtype),
            np.zeros(CHANNELS, dtype),
        )

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        return [
            (f"{_STAGE_SMOOTH}.kernels", self.smooth_kernels),
            (f"{_STAGE_SMOOTH}.biases", self.smooth_biases),
            (f"{_STAGE_OPPONENT}.kernels", self.opponent_kernels),
            (f"{_STAGE_OPPONENT}.biases", self.opponent_biases),
        ]


def model_param_arrays(model: RetinaModel) -> list[tuple[str, np.ndarray]]:
    """Parameter arrays in the fixed (smooth kernels, smooth biases,
    opponent kernels, opponent biases) order used everywhere."""
    return [
        (f"{_STAGE_SMOOTH}.kernels", model.smooth.kernels),
        (f"{_STAGE_SMOOTH}.biases", model.smooth.biases),
        (f"{_STAGE_OPPONENT}.kernels", model.opponent.kernels),
        (f"{_STAGE_OPPONENT}.biases", model.opponent.biases),
    ]


def init_model(
    seed: int = 0,
    sigma_g: float = DEFAULT_SIGMA_SMOOTH,
    sigma1: float = DEFAULT_SIGMA_CENTER,
    sigma2: float = DEFAULT_SIGMA_SURROUND,
    padding: PaddingMode = "replicate",
) -> RetinaModel:
    """Deterministic initial model: Gaussian smoothing kernels, DoG opponent
    kernels, zero biases.

    The seed does not currently influence the (deterministic) init; it is
    recorded in the model metadata so checkpoints document the run that
    produced them.
    """
    smooth_kernel = gaussian_kernel(GaussianSpec(sigma_g, SMOOTH_KERNEL_SIZE))
    opponent_kernel = dog_kernel(sigma1, sigma2, OPPONENT_KERNEL_SIZE)
    smooth = StageParams(
        np.repeat(smooth_kernel[np.newaxis], CHANNELS, axis=0).astype(np.float32),
        np.zeros(CHANNELS, np.float32),
    )
    opponent = StageParams(
        np.repeat(opponent_kernel[np.newaxis], CHANNELS, axis=0).astype(np.float32),
        np.zeros(CHANNELS, np.float32),
    )
    metadata = {
        "seed": int(seed),
        "sigma_g": float(sigma_g),
        "sigma1": float(sigma1),
        "sigma2": float(sigma2),
    }
    return RetinaModel(smooth, opponent, padding, metadata)


def forward(model: RetinaModel, img: ImageTensor) -> tuple[ImageTensor, ForwardTape]:
    """Run the enhancement pipeline on a 3-channel image.

    Returns the unclamped output and the tape of intermediates needed by
    backward(). Channels never mix.
    """
    if img.channels != CHANNELS:
        raise InvalidInputError(f"forward expects 3 channels, got {img.channels}")
    x = img.data
    smoothed = np.empty_like(x)
    combined = np.empty_like(x)
    output = np.empty_like(x)
    for c in range(CHANNELS):
        plane = x[:, :, c]
        smoothed[:, :, c] = (
            correlate_same(plane, model.smooth.kernels[c], model.padding)
            + model.smooth.biases[c]
        )
        combined[:, :, c] = plane + smoothed[:, :, c]
        output[:, :, c] = (
            plane
            + correlate_same(combined[:, :, c], model.opponent.kernels[c], model.padding)
            + model.opponent.biases[c]
        )
    return ImageTensor(output), ForwardTape(x, smoothed, combined)


def backward(model: RetinaModel, tape: ForwardTape, upstream_grad: ImageTensor) -> ModelGrads:
    """Exact gradients of all 108 parameters given d(loss)/d(output).

    The chain runs output -> opponent stage -> combined -> smoothing stage;
    the gradient with respect to the input image is not needed for training
    and is not computed.
    """
    if upstream_grad.data.shape != tape.inputs.shape:
        raise InvalidInputError(
            f"upstream gradient shape {upstream_grad.data.shape} does not match "
            f"forward output shape {tape.inputs.shape}"
        )
    dtype = np.result_type(upstream_grad.dtype, model.smooth.kernels.dtype)
    grads = ModelGrads.zeros(dtype)
    for c in range(CHANNELS):
        up = upstream_grad.data[:, :, c]
        grads.opponent_biases[c] = up.sum()
        grads.opponent_kernels[c] = correlate_grad_kernel(
            tape.combined[:, :, c], OPPONENT_KERNEL_SIZE, up, model.padding
        )
        grad_combined = correlate_grad_input(
            model.opponent.kernels[c], up, model.padding
        )
        grads.smooth_biases[c] = grad_combined.sum()
        grads.smooth_kernels[c] = correlate_grad_kernel(
            tape.inputs[:, :, c], SMOOTH_KERNEL_SIZE, grad_combined, model.padding
        )
    return grads


@dataclass(frozen=True)
class VariantConfig:
    """Configuration for the bipolar-cell relay variants.

    ``recursive`` divides the input by (alpha + smoothed) and is numerically
    unstable by design; ``fir`` computes alpha*I + beta*I*smoothed;
    ``residual`` is the I + smoothed form the trained network uses.
    """

    alpha: float = 1.0
    beta: float = 1.0
    variant: str = "residual"

    def __post_init__(self) -> None:
        if self.variant not in ("recursive", "fir", "residual"):
            raise InvalidParameterError(f"unknown variant {self.variant!r}")
        if self.variant == "recursive" and not self.alpha > 0:
            raise InvalidParameterError(
                f"recursive variant needs alpha > 0 as denominator guard, got {self.alpha}"
            )


def _check_variant_planes(plane: ImageTensor, smoothed: ImageTensor) -> None:
    if plane.channels != 1 or smoothed.channels != 1:
        raise InvalidInputError("variant ops expect single-channel images")
    if plane.data.shape != smoothed.data.shape:
        raise InvalidInputError(
            f"plane shape {plane.data.shape} does not match smoothed shape "
            f"{smoothed.data.shape}"
        )


def bc_recursive(plane: ImageTensor, smoothed: ImageTensor, cfg: VariantConfig) -> ImageTensor:
    """Divisive relay: input / (alpha + smoothed), no clamping.

    Isolated bright pixels over dark neighborhoods are amplified without
    bound; a zero denominator anywhere raises NumericError naming the pixel.
    """
    if cfg.variant != "recursive":
        raise InvalidParameterError(f"config variant is {cfg.variant!r}, not 'recursive'")
    _check_variant_planes(plane, smoothed)
    denom = cfg.alpha + smoothed.plane(0)
    zero = np.argwhere(denom == 0)
    if zero.size:
        y, x = zero[0]
        raise NumericError(
            f"zero denominator alpha + smoothed at pixel (row={y}, col={x})"
        )
    return ImageTensor(plane.plane(0) / denom)


def bc_fir(plane: ImageTensor, smoothed: ImageTensor, cfg: VariantConfig) -> ImageTensor:
    """Finite-impulse-response relay: alpha*I + beta*I*smoothed, pointwise."""
    if cfg.variant != "fir":
        raise InvalidParameterError(f"config variant is {cfg.variant!r}, not 'fir'")
    _check_variant_planes(plane, smoothed)
    p = plane.plane(0)
    return ImageTensor(cfg.alpha * p + cfg.beta * p * smoothed.plane(0))


def bc_residual(plane: ImageTensor, smoothed: ImageTensor) -> ImageTensor:
    """Residual relay: input + smoothed (what the trained pipeline uses)."""
    _check_variant_planes(plane, smoothed)
    return ImageTensor(plane.plane(0) + smoothed.plane(0))


def _stage_to_json(stage: StageParams) -> dict:
    return {
        "kernel_size": int(stage.kernel_size),
        "kernels": [[float(v) for v in k.ravel()] for k in stage.kernels],
        "biases": [float(b) for b in stage.biases],
    }


def save_checkpoint(model: RetinaModel, metadata: dict | None = None) -> bytes:
    """Serialize a model as UTF-8 JSON with a fixed key order.

    ``metadata`` defaults to the model's own metadata (training summaries
    end up here); save(load(save(m))) is byte-identical.
    """
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "padding": model.padding,
        _STAGE_SMOOTH: _stage_to_json(model.smooth),
        _STAGE_OPPONENT: _stage_to_json(model.opponent),
        "metadata": metadata if metadata is not None else model.metadata,
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def _stage_from_json(doc: dict, name: str, expected_size: int) -> StageParams:
    try:
        stage = doc[name]
        size = stage["kernel_size"]
        kernels = stage["kernels"]
        biases = stage["biases"]
    except (KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"checkpoint is missing fields for {name}: {exc}")
    if size != expected_size:
        raise CheckpointFormatError(
            f"{name} kernel_size must be {expected_size}, got {size}"
        )
    if len(kernels) != CHANNELS or any(len(k) != size * size for k in kernels):
        raise CheckpointFormatError(
            f"{name} needs {CHANNELS} kernel arrays of {size * size} reals"
        )
    if len(biases) != CHANNELS:
        raise CheckpointFormatError(f"{name} needs {CHANNELS} biases")
    values = [v for k in kernels for v in k] + list(biases)
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
        raise CheckpointFormatError(f"{name} contains non-finite or non-numeric values")
    kernel_arr = np.asarray(kernels, np.float32).reshape(CHANNELS, size, size)
    return StageParams(kernel_arr, np.asarray(biases, np.float32))


def load_checkpoint(data: bytes | str) -> RetinaModel:
    """Parse checkpoint bytes back into a model, validating shape and finiteness."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"checkpoint is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise CheckpointFormatError("checkpoint root must be a JSON object")
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"unsupported format_version {doc.get('format_version')!r}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    padding = doc.get("padding")
    if padding not in ("replicate", "zero"):
        raise CheckpointFormatError(f"invalid padding {padding!r}")
    smooth = _stage_from_json(doc, _STAGE_SMOOTH, SMOOTH_KERNEL_SIZE)
    opponent = _stage_from_json(doc, _STAGE_OPPONENT, OPPONENT_KERNEL_SIZE)
    metadata = doc.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise CheckpointFormatError("metadata must be a JSON object")
    return RetinaModel(smooth, opponent, padding, metadata)
