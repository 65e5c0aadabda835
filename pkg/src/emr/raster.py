"""Raster primitives: 8-bit frames, alpha mattes, trimaps, and PNM codecs.

Conventions used throughout the package:

* samples are unsigned 8-bit, maxval fixed at 255;
* whenever a real value is stored back to 8 bits it is rounded half away
  from zero (for non-negative values: ``floor(x + 0.5)``), then clamped;
* grayscale conversion uses the 0.299 / 0.587 / 0.114 luma weights;
* all raster types are immutable values and safe to share between threads.

File I/O is binary PPM (``P6``, 3 channels) and PGM (``P5``, 1 channel),
bit-exact: ``decode(encode(frame)) == frame``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidChannels,
    InvalidFactor,
    InvalidStep,
    MalformedImage,
)

# Trimap label values.
BG = 0
UNKNOWN = 1
FG = 2

_GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def round_u8(values) -> np.ndarray:
    """Round non-negative reals half away from zero, clamp to [0, 255], as uint8."""
    arr = np.asarray(values, dtype=np.float64)
    return np.minimum(np.floor(arr + 0.5), 255.0).astype(np.uint8)


@dataclass(frozen=True)
class Frame:
    """A row-major 8-bit raster with 1 (gray) or 3 (RGB) channels."""

    width: int
    height: int
    channels: int
    data: bytes
    index: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        expected = self.width * self.height * self.channels
        if len(self.data) != expected:
            raise ValueError(
                f"data length {len(self.data)} != width*height*channels = {expected}"
            )
        if self.index < 0:
            raise ValueError("frame index must be >= 0")

    def to_array(self) -> np.ndarray:
        """Pixel data as a (height, width, channels) uint8 array (a copy)."""
        arr = np.frombuffer(self.data, dtype=np.uint8)
        return arr.reshape(self.height, self.width, self.channels).copy()

    @classmethod
    def from_array(cls, arr: np.ndarray, index: int = 0) -> "Frame":
        """Build a frame from a (h, w) or (h, w, c) uint8 array."""
        a = np.asarray(arr, dtype=np.uint8)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ValueError("expected a 2-d or 3-d array")
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, data=a.tobytes(), index=index)


@dataclass(frozen=True)
class AlphaMatte:
    """Per-pixel opacity in [0, 1], row-major."""

    width: int
    height: int
    alpha: tuple

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("matte dimensions must be >= 1")
        if len(self.alpha) != self.width * self.height:
            raise ValueError("alpha length != width*height")
        if any(a < 0.0 or a > 1.0 for a in self.alpha):
            raise ValueError("alpha values must lie in [0, 1]")

    def to_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=np.float64).reshape(self.height, self.width)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "AlphaMatte":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls(width=a.shape[1], height=a.shape[0], alpha=tuple(a.reshape(-1).tolist()))

    def to_frame(self, index: int = 0) -> Frame:
        """Quantize to an 8-bit grayscale frame (alpha * 255, rounded)."""
        return Frame.from_array(round_u8(self.to_array() * 255.0), index=index)


@dataclass(frozen=True)
class Trimap:
    """Per-pixel FG / BG / UNKNOWN labeling, row-major."""

    width: int
    height: int
    labels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("trimap dimensions must be >= 1")
        if len(self.labels) != self.width * self.height:
            raise ValueError("labels length != width*height")
        if not set(self.labels) <= {BG, UNKNOWN, FG}:
            raise ValueError("labels must be BG, UNKNOWN or FG")

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.labels, dtype=np.uint8).reshape(self.height, self.width).copy()

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Trimap":
        a = np.asarray(arr, dtype=np.uint8)
        return cls(width=a.shape[1], height=a.shape[0], labels=a.tobytes())


def to_grayscale(frame: Frame) -> Frame:
    """Convert a 3-channel frame to grayscale by the fixed luma weights."""
    if frame.channels != 3:
        raise InvalidChannels("to_grayscale requires a 3-channel frame")
    arr = frame.to_array().astype(np.float64)
    gray = arr[:, :, 0] * _GRAY_WEIGHTS[0] + arr[:, :, 1] * _GRAY_WEIGHTS[1] + arr[:, :, 2] * _GRAY_WEIGHTS[2]
    out = Frame.from_array(round_u8(gray), index=frame.index)
    return out


def downsample(frame: Frame, factor: int) -> Frame:
    """Reduce resolution by the rounded mean of each factor x factor block."""
    if not isinstance(factor, int) or factor < 1:
        raise InvalidFactor(f"factor must be an integer >= 1, got {factor!r}")
    if factor == 1:
        return frame
    if frame.width % factor or frame.height % factor:
        raise DimensionMismatch(
            f"{frame.width}x{frame.height} not divisible by factor {factor}"
        )
    arr = frame.to_array().astype(np.uint64)
    h, w = frame.height // factor, frame.width // factor
    blocks = arr.reshape(h, factor, w, factor, frame.channels)
    sums = blocks.sum(axis=(1, 3))
    n = factor * factor
    # integer half-away-from-zero rounding of sums / n
    means = (2 * sums + n) // (2 * n)
    return Frame.from_array(means.astype(np.uint8), index=frame.index)


def quantize(frame: Frame, step: int) -> Frame:
    """Snap each sample to the nearest multiple of ``step``, clamped to 255."""
    if not isinstance(step, int) or step < 1 or step > 128:
        raise InvalidStep(f"step must be an integer in [1, 128], got {step!r}")
    if step == 1:
        return frame
    lut = np.minimum(((2 * np.arange(256, dtype=np.uint32) + step) // (2 * step)) * step, 255)
    arr = lut.astype(np.uint8)[frame.to_array()]
    return Frame.from_array(arr, index=frame.index)


# --- PNM codec ----------------------------------------------------------------
#
# Layout: magic ("P6" or "P5"), width, height, maxval (always 255), each token
# followed by whitespace, then exactly width*height*channels raw bytes.  The
# encoder emits "P6\n{w} {h}\n255\n"; the decoder accepts any run of blank
# characters between header tokens but exactly one after the maxval.

_WHITESPACE = b" \t\r\n\x0b\x0c"


def encode_pnm(frame: Frame) -> bytes:
    """Serialize a frame as binary PPM (3-channel) or PGM (1-channel)."""
    magic = b"P6" if frame.channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (frame.width, frame.height)
    return header + frame.data


def decode_pnm(data: bytes, index: int = 0) -> Frame:
    """Parse binary PPM/PGM bytes into a frame; raise MalformedImage otherwise."""
    if len(data) < 2:
        raise MalformedImage("too short for a magic number")
    magic = data[:2]
    if magic == b"P6":
        channels = 3
    elif magic == b"P5":
        channels = 1
    else:
        raise MalformedImage(f"unsupported magic {magic!r}")

    pos = 2
    fields = []
    for _ in range(3):
        while pos < len(data) and data[pos] in _WHITESPACE:
            pos += 1
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE:
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise MalformedImage(f"bad header token {token!r}")
        fields.append(int(token))
    if pos >= len(data):
        raise MalformedImage("missing payload")
    pos += 1  # the single whitespace byte terminating the header

    width, height, maxval = fields
    if maxval != 255:
        raise MalformedImage(f"unsupported maxval {maxval}")
    if width < 1 or height < 1:
        raise MalformedImage("dimensions must be >= 1")
    payload = data[pos:]
    expected = width * height * channels
    if len(payload) < expected:
        raise MalformedImage(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise MalformedImage("trailing bytes after payload")
    return Frame(width=width, height=height, channels=channels, data=payload, index=index)


def load_pnm(path, index: int = 0) -> Frame:
    with open(path, "rb") as fh:
        return decode_pnm(fh.read(), index=index)


def save_pnm(frame: Frame, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pnm(frame))
