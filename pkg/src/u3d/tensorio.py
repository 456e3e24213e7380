"""Dense float32 tensors, the U3DT container format, video clips, and
pixel-space operations.

Tensors are numpy float32 arrays in C (row-major) order.  On disk and on the
wire they use the U3DT container (little-endian throughout):

    bytes 0-3   ASCII magic "U3DT"
    byte  4     version, currently 1
    byte  5     dtype code, 0 = float32
    byte  6     ndim, 1..8
    byte  7     reserved, 0
    ndim x u32  extents
    payload     product(extents) float32 values, row-major

No padding, no footer.  A stream may carry several tensors back to back;
each read consumes exactly one.

Video clips are 4-d tensors shaped (frames, height, width, channels) with
pixel values on the [0, 255] scale.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

import numpy as np

from .errors import BadMagic, TensorFormatError, Truncated, ValidationError

MAGIC = b"U3DT"
VERSION = 1
DTYPE_F32 = 0
MAX_NDIM = 8
MAX_ELEMENTS = 2**31  # refuse absurd allocations before they happen

PIXEL_MIN = 0.0
PIXEL_MAX = 255.0


def _as_f32(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("tensor contains NaN or Inf values")
    return arr


def write_tensor(tensor, sink: BinaryIO) -> int:
    """Serialize a tensor to `sink` in U3DT format.

    Returns the number of bytes written.  The tensor is validated (finite
    values, sane dims) before anything is emitted.
    """
    arr = _as_f32(tensor)
    if arr.ndim < 1 or arr.ndim > MAX_NDIM:
        raise ValidationError(f"ndim must be 1..{MAX_NDIM}, got {arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise ValidationError(f"all extents must be >= 1, got {arr.shape}")
    if arr.size > MAX_ELEMENTS:
        raise ValidationError(f"tensor too large: {arr.size} elements")
    header = MAGIC + struct.pack("<BBBB", VERSION, DTYPE_F32, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.tobytes(order="C")
    sink.write(header)
    sink.write(dims)
    sink.write(payload)
    return len(header) + len(dims) + len(payload)


def _read_exact(source: BinaryIO, n: int) -> bytes:
    buf = source.read(n)
    if buf is None or len(buf) < n:
        raise Truncated(f"expected {n} bytes, got {0 if buf is None else len(buf)}")
    return buf


def read_tensor(source: BinaryIO) -> np.ndarray:
    """Read exactly one U3DT tensor from `source`.

    Raises BadMagic, Truncated, or TensorFormatError on malformed data.
    """
    head = _read_exact(source, 8)
    if head[:4] != MAGIC:
        raise BadMagic(f"bad magic {head[:4]!r}")
    version, dtype, ndim, reserved = struct.unpack("<BBBB", head[4:])
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype code {dtype}")
    if not 1 <= ndim <= MAX_NDIM:
        raise TensorFormatError(f"ndim out of range: {ndim}")
    dims = struct.unpack(f"<{ndim}I", _read_exact(source, 4 * ndim))
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"zero extent in dims {dims}")
    size = 1
    for d in dims:
        size *= d
        if size > MAX_ELEMENTS:
            raise TensorFormatError(f"dims {dims} overflow element limit")
    arr = np.frombuffer(_read_exact(source, 4 * size), dtype="<f4").reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise TensorFormatError("payload contains non-finite values")
    return np.ascontiguousarray(arr)


def iter_tensors(source: BinaryIO) -> Iterator[np.ndarray]:
    """Yield tensors from a stream until clean EOF.

    EOF in the middle of a tensor raises Truncated; EOF on a message
    boundary ends iteration.
    """
    while True:
        head = source.read(8)
        if not head:
            return
        if len(head) < 8:
            raise Truncated("partial header at end of stream")
        if head[:4] != MAGIC:
            raise BadMagic(f"bad magic {head[:4]!r}")
        version, dtype, ndim, _ = struct.unpack("<BBBB", head[4:])
        if version != VERSION or dtype != DTYPE_F32 or not 1 <= ndim <= MAX_NDIM:
            raise TensorFormatError("bad header fields mid-stream")
        dims = struct.unpack(f"<{ndim}I", _read_exact(source, 4 * ndim))
        if any(d < 1 for d in dims):
            raise TensorFormatError(f"zero extent in dims {dims}")
        size = int(np.prod(dims, dtype=np.int64))
        if size > MAX_ELEMENTS:
            raise TensorFormatError(f"dims {dims} overflow element limit")
        arr = np.frombuffer(_read_exact(source, 4 * size), dtype="<f4").reshape(dims)
        if not np.all(np.isfinite(arr)):
            raise TensorFormatError("payload contains non-finite values")
        yield np.ascontiguousarray(arr)


def tensor_bytes(tensor) -> bytes:
    """Serialize a tensor to an in-memory U3DT byte string."""
    import io

    buf = io.BytesIO()
    write_tensor(tensor, buf)
    return buf.getvalue()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    import io

    return read_tensor(io.BytesIO(data))


def save_tensor(tensor, path) -> int:
    with open(path, "wb") as f:
        return write_tensor(tensor, f)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_tensor(f)


@dataclass(frozen=True)
class VideoClip:
    """A video clip: float32 array (frames, height, width, channels) in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_f32(self.data)
        if arr.ndim != 4:
            raise ValidationError(f"clip must be 4-d (T,H,W,C), got shape {arr.shape}")
        if arr.shape[3] not in (1, 3):
            raise ValidationError(f"channels must be 1 or 3, got {arr.shape[3]}")
        if arr.min() < PIXEL_MIN or arr.max() > PIXEL_MAX:
            raise ValidationError("pixel values outside [0, 255]")
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    def window(self, start: int, length: int) -> "VideoClip":
        if start < 0 or start + length > self.frames:
            raise ValidationError(
                f"window [{start}, {start + length}) outside clip of {self.frames} frames"
            )
        return VideoClip(self.data[start : start + length])


def load_clip(path) -> VideoClip:
    arr = load_tensor(path)
    if arr.ndim != 4:
        raise TensorFormatError(f"clip file must hold a 4-d tensor, got ndim {arr.ndim}")
    return VideoClip(arr)


def save_clip(clip: VideoClip, path) -> int:
    return save_tensor(clip.data, path)


@dataclass(frozen=True)
class PixelMetricReport:
    """Pixel-space deviation between two clips."""

    mse: float
    linf: float

    def __post_init__(self):
        if self.mse < 0 or self.linf < 0:
            raise ValidationError("metrics must be non-negative")
        # mse <= linf^2 with slack for float accumulation error
        if self.mse > self.linf**2 * (1 + 1e-9) + 1e-12:
            raise ValidationError(f"mse {self.mse} exceeds linf^2 {self.linf**2}")


def apply_perturbation(clip: VideoClip, volume, start_offset: int = 0) -> VideoClip:
    """Add a circular noise volume to a clip and clamp to the pixel range.

    Output frame t is clamp(clip[t] + volume[(t + start_offset) mod T], 0, 255).
    The noise slice is broadcast identically across color channels.
    `volume` is a PerturbationVolume or a raw (T, H, W) array.
    """
    vol = np.asarray(getattr(volume, "volume", volume), dtype=np.float32)
    if vol.ndim != 3:
        raise ValidationError(f"volume must be 3-d (T,H,W), got shape {vol.shape}")
    if vol.shape[1] != clip.height or vol.shape[2] != clip.width:
        raise ValidationError(
            f"volume spatial dims {vol.shape[1:]} do not match clip {clip.height}x{clip.width}"
        )
    period = vol.shape[0]
    idx = (np.arange(clip.frames) + start_offset) % period
    out = clip.data + vol[idx][:, :, :, None]
    np.clip(out, PIXEL_MIN, PIXEL_MAX, out=out)
    return VideoClip(out)


def pixel_metrics(clean: VideoClip, adv: VideoClip) -> PixelMetricReport:
    """Mean squared deviation and max absolute deviation between two clips."""
    if clean.data.shape != adv.data.shape:
        raise ValidationError(
            f"clip shapes differ: {clean.data.shape} vs {adv.data.shape}"
        )
    diff = adv.data.astype(np.float64) - clean.data.astype(np.float64)
    return PixelMetricReport(mse=float(np.mean(diff**2)), linf=float(np.max(np.abs(diff))))
