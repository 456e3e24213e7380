"""Streaming frame injection with per-frame latency accounting.

Frames flow one at a time from a source (clip-file replay or a pipe of
U3DT tensors), get the volume slice for their stream position added and
clamped, and are emitted in order.  Only the add-and-clamp step is timed;
reading and writing sit outside the measured window, mirroring a
deployment where injection happens inside an existing frame path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Optional

import numpy as np

from .errors import ValidationError
from .tensorio import (
    PIXEL_MAX,
    PIXEL_MIN,
    iter_tensors,
    load_clip,
    write_tensor,
)

FRAME_BUDGET = 1.0 / 30.0  # seconds per frame at 30 fps


@dataclass(frozen=True)
class LatencyReport:
    """Per-frame injection latency summary against a frame budget."""

    mean_seconds: float
    p95_seconds: float
    max_seconds: float
    frames: int
    budget_seconds: float
    cycle_mean_seconds: float  # full read->inject->emit loop

    def __post_init__(self):
        if self.frames < 1:
            raise ValidationError(f"frames must be >= 1, got {self.frames}")
        if self.p95_seconds > self.max_seconds:
            raise ValidationError("p95 latency cannot exceed the maximum")

    @property
    def within_budget(self) -> bool:
        return self.mean_seconds <= self.budget_seconds

    def to_dict(self) -> dict:
        return {
            "mean_seconds": self.mean_seconds,
            "p95_seconds": self.p95_seconds,
            "max_seconds": self.max_seconds,
            "frames": self.frames,
            "budget_seconds": self.budget_seconds,
            "cycle_mean_seconds": self.cycle_mean_seconds,
            "within_budget": self.within_budget,
        }


def clip_frames(path, repeat: int = 1) -> Iterator[np.ndarray]:
    """Replay a stored clip frame by frame, `repeat` times over."""
    if repeat < 1:
        raise ValidationError(f"repeat must be >= 1, got {repeat}")
    clip = load_clip(path)
    for _ in range(repeat):
        for t in range(clip.frames):
            yield clip.data[t]


def pipe_frames(source: BinaryIO) -> Iterator[np.ndarray]:
    """Read (H, W, C) frame tensors from a byte stream until clean EOF."""
    for tensor in iter_tensors(source):
        if tensor.ndim == 2:
            tensor = tensor[:, :, None]
        if tensor.ndim != 3 or tensor.shape[2] not in (1, 3):
            raise ValidationError(
                f"frames must be (H, W, C) with 1 or 3 channels, got {tensor.shape}"
            )
        yield tensor


def run_stream(
    frames: Iterator[np.ndarray],
    volume,
    offset: int = 0,
    sink: Optional[BinaryIO] = None,
    budget: float = FRAME_BUDGET,
):
    """Inject a circular volume into a frame stream.

    Frame t (counted from attack start) receives volume slice
    (t + offset) mod T, clamped to the pixel range.  Returns
    (LatencyReport, per-frame inject seconds array).  Frames are never
    reordered or dropped; the source deciding to stop ends the run
    cleanly.
    """
    vol = np.asarray(getattr(volume, "volume", volume), dtype=np.float32)
    if vol.ndim != 3 or vol.size == 0:
        raise ValidationError(f"volume must be a non-empty (T, H, W) array")
    period = vol.shape[0]
    inject_times = []
    cycle_times = []
    expected_hw = vol.shape[1:]
    t = 0
    cycle_start = time.perf_counter()
    for frame in frames:
        if frame.shape[:2] != expected_hw:
            raise ValidationError(
                f"frame {t} is {frame.shape[:2]}, volume expects {expected_hw}"
            )
        tic = time.perf_counter()
        out = frame + vol[(t + offset) % period][:, :, None]
        np.clip(out, PIXEL_MIN, PIXEL_MAX, out=out)
        inject_times.append(time.perf_counter() - tic)
        if sink is not None:
            write_tensor(out, sink)
        t += 1
        now = time.perf_counter()
        cycle_times.append(now - cycle_start)
        cycle_start = now
    if t == 0:
        raise ValidationError("frame source yielded no frames")
    inject = np.array(inject_times)
    report = LatencyReport(
        mean_seconds=float(inject.mean()),
        p95_seconds=float(np.percentile(inject, 95)),
        max_seconds=float(inject.max()),
        frames=t,
        budget_seconds=float(budget),
        cycle_mean_seconds=float(np.mean(cycle_times)),
    )
    return report, inject
