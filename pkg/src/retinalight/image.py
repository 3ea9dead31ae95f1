"""Image tensors and PNG input/output.

An image is a float array of shape (height, width, channels) with values
nominally in [0, 1]. Decoding divides integer samples by the bit-depth
maximum (255 or 65535); values are clamped back to [0, 1] only at encode
time, so intermediates of the enhancement pipeline may leave the nominal
range without being destroyed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    ImageDecodeError,
    InvalidChannelError,
    InvalidDimensionError,
    UnsupportedFormatError,
)

_FLOAT_DTYPES = (np.float32, np.float64)


@dataclass(frozen=True)
class ImageTensor:
    """Immutable (H, W, C) float image, C in {1, 3}.

    The wrapped array is marked read-only on construction; operations that
    derive new images always allocate. 2-D input arrays are accepted and
    treated as single-channel.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise InvalidDimensionError(
                f"expected a (H, W, C) array, got shape {arr.shape}"
            )
        height, width, channels = arr.shape
        if height < 1 or width < 1:
            raise InvalidDimensionError(f"zero-sized image: {arr.shape}")
        if channels not in (1, 3):
            raise InvalidChannelError(f"channel count must be 1 or 3, got {channels}")
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        view = arr.view()
        view.setflags(write=False)  # read-only view; the caller's array is untouched
        object.__setattr__(self, "data", view)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def plane(self, channel: int) -> np.ndarray:
        """2-D view of one channel."""
        return self.data[:, :, channel]

    def clamped(self) -> "ImageTensor":
        return ImageTensor(np.clip(self.data, 0.0, 1.0))

    def astype(self, dtype) -> "ImageTensor":
        return ImageTensor(self.data.astype(dtype))


def decode_png(data: bytes) -> ImageTensor:
    """Decode PNG bytes to a unit-range float image.

    Supports 8-bit and 16-bit grayscale and truecolor input; alpha channels
    are dropped, palettes are expanded to truecolor. Raises
    ImageDecodeError for malformed data and UnsupportedFormatError for
    sample formats outside that subset.
    """
    buf = np.frombuffer(data, dtype=np.uint8)
    arr = cv2.imdecode(buf, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ImageDecodeError("could not decode bytes as PNG")
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype == np.uint16:
        scale = 65535.0
    else:
        raise UnsupportedFormatError(f"unsupported sample type {arr.dtype}")
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    elif arr.ndim == 3 and arr.shape[2] == 3:
        arr = cv2.cvtColor(arr, cv2.COLOR_BGR2RGB)
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = cv2.cvtColor(arr, cv2.COLOR_BGRA2RGB)
    else:
        raise UnsupportedFormatError(f"unsupported channel layout {arr.shape}")
    return ImageTensor((arr / scale).astype(np.float32))


def encode_png(img: ImageTensor) -> bytes:
    """Encode an image as 8-bit PNG, clamping values to [0, 1] first.

    decode_png(encode_png(x)) equals clamp(x) within 1/255 per sample.
    Three-channel images are written as truecolor, single-channel as
    grayscale.
    """
    clamped = np.clip(img.data, 0.0, 1.0)
    quantized = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)
    if img.channels == 1:
        raw = quantized[:, :, 0]
    else:
        raw = cv2.cvtColor(quantized, cv2.COLOR_RGB2BGR)
    ok, buf = cv2.imencode(".png", raw)
    if not ok:
        raise ImageDecodeError("PNG encoding failed")
    return buf.tobytes()


def read_png(path: str | Path) -> ImageTensor:
    return decode_png(Path(path).read_bytes())


def write_png(path: str | Path, img: ImageTensor) -> None:
    Path(path).write_bytes(encode_png(img))


def split_channels(img: ImageTensor) -> tuple[ImageTensor, ImageTensor, ImageTensor]:
    """Split an RGB image into its three single-channel planes."""
    if img.channels != 3:
        raise InvalidChannelError(f"need 3 channels to split, got {img.channels}")
    return tuple(ImageTensor(img.data[:, :, c : c + 1]) for c in range(3))


def merge_channels(planes) -> ImageTensor:
    """Inverse of split_channels: merge_channels(split_channels(x)) == x bitwise."""
    planes = tuple(planes)
    if len(planes) != 3 or any(p.channels != 1 for p in planes):
        raise InvalidChannelError("merge_channels expects exactly 3 single-channel images")
    if len({(p.height, p.width) for p in planes}) != 1:
        raise InvalidDimensionError("channel planes differ in size")
    return ImageTensor(np.concatenate([p.data for p in planes], axis=2))
