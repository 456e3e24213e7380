"""Layered video feature extraction and power-normalized feature distances.

An extractor maps a fixed-length clip window (T_in frames) to an ordered
list of M feature tensors.  The distance between two clips at layer d is
the l2 norm between power-normalized features; the total distance sums
all layers (optionally restricted by a layer mask).

The built-in extractor is a small fixed-random-weight 3D convolution
stack: deterministic given its seed, nonlinear, and multi-scale — enough
structure for optimization to have a meaningful landscape without any ML
framework dependency.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .tensorio import VideoClip

T_IN = 16  # frames consumed per extractor window

# (stride_t, stride_y, stride_x), output channels — kernels are all 3x3x3
DEFAULT_STAGES = (
    ((1, 2, 2), 8),
    ((2, 2, 2), 16),
    ((2, 2, 2), 32),
    ((1, 2, 2), 64),
)

WEIGHT_SCALE = 0.1


class FeatureExtractor(ABC):
    """Maps a T_in-frame clip window to M ordered feature tensors."""

    @property
    @abstractmethod
    def num_layers(self) -> int:
        """Number of feature layers M."""

    @property
    def input_frames(self) -> int:
        return T_IN

    @abstractmethod
    def extract(self, clip: VideoClip) -> list:
        """Return the M feature tensors for a clip of exactly input_frames."""

    def _check_window(self, clip: VideoClip) -> None:
        if clip.frames != self.input_frames:
            raise ValidationError(
                f"extractor consumes exactly {self.input_frames} frames, "
                f"got {clip.frames}"
            )


def _pad_same(size: int, stride: int) -> tuple:
    # zero padding so that out = ceil(in / stride) with a 3-wide kernel
    out = -(-size // stride)
    total = max((out - 1) * stride + 3 - size, 0)
    return total // 2, total - total // 2


def _conv3d(x: np.ndarray, w: np.ndarray, strides: tuple) -> np.ndarray:
    """Strided 'same' 3D convolution of (T,H,W,C) by (Cout,3,3,3,Cin)."""
    pads = [_pad_same(x.shape[i], strides[i]) for i in range(3)]
    x = np.pad(x, pads + [(0, 0)])
    win = np.lib.stride_tricks.sliding_window_view(x, (3, 3, 3), axis=(0, 1, 2))
    win = win[:: strides[0], :: strides[1], :: strides[2]]
    # win axes: (T', H', W', C, kt, ky, kx); contract against (kt, ky, kx, Cin)
    return np.tensordot(win, w, axes=([4, 5, 6, 3], [1, 2, 3, 4]))


class BuiltinExtractor(FeatureExtractor):
    """Fixed-random-weight 3D conv stack with rectifier activations.

    Weights are uniform in [-WEIGHT_SCALE, WEIGHT_SCALE], drawn from a
    stream keyed by (seed, stage, input channels), so two instances with
    the same seed produce bit-identical features.
    """

    def __init__(self, seed: int = 0, stages: Sequence = DEFAULT_STAGES):
        if not stages:
            raise ValidationError("extractor needs at least one stage")
        self.seed = int(seed)
        self.stages = tuple((tuple(s), int(c)) for s, c in stages)
        self._weights = {}  # (stage index, cin) -> kernel

    @property
    def num_layers(self) -> int:
        return len(self.stages)

    def _weight(self, stage: int, cin: int) -> np.ndarray:
        key = (stage, cin)
        if key not in self._weights:
            cout = self.stages[stage][1]
            rng = np.random.default_rng([self.seed, stage, cin])
            self._weights[key] = rng.uniform(
                -WEIGHT_SCALE, WEIGHT_SCALE, size=(cout, 3, 3, 3, cin)
            )
        return self._weights[key]

    def extract(self, clip: VideoClip) -> list:
        self._check_window(clip)
        x = clip.data.astype(np.float64) / 255.0
        features = []
        for i, (strides, _) in enumerate(self.stages):
            x = _conv3d(x, self._weight(i, x.shape[3]), strides)
            np.maximum(x, 0.0, out=x)  # rectifier
            if x.size == 0:
                raise ValidationError(
                    f"stage {i} produced an empty tensor for input {clip.data.shape}"
                )
            features.append(x)
        return features


@dataclass(frozen=True)
class DistanceConfig:
    """Distance settings: normalization exponent and optional layer subset.

    layer_mask holds 1-based layer indices to include; None means all M.
    """

    alpha: float = 0.5
    layer_mask: Optional[tuple] = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.layer_mask is not None:
            mask = tuple(int(d) for d in self.layer_mask)
            if len(mask) == 0 or any(d < 1 for d in mask):
                raise ValidationError(f"layer_mask must hold indices >= 1, got {mask}")
            object.__setattr__(self, "layer_mask", mask)

    def layers(self, num_layers: int):
        if self.layer_mask is None:
            return range(1, num_layers + 1)
        if any(d > num_layers for d in self.layer_mask):
            raise ValidationError(
                f"layer_mask {self.layer_mask} exceeds {num_layers} layers"
            )
        return self.layer_mask


def power_normalize(z, alpha: float):
    """Elementwise sign(z) * |z|**alpha (shape-preserving)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.abs(z) ** alpha


def normalized_features(extractor: FeatureExtractor, clip: VideoClip, cfg: DistanceConfig) -> list:
    """Extract and power-normalize all layers, flattened for norm taking."""
    return [power_normalize(f, cfg.alpha).ravel() for f in extractor.extract(clip)]


def distance_between_normalized(feats_a: list, feats_b: list, cfg: DistanceConfig) -> float:
    if len(feats_a) != len(feats_b):
        raise ValidationError("feature lists have mismatched layer counts")
    total = 0.0
    for d in cfg.layers(len(feats_a)):
        total += float(np.linalg.norm(feats_a[d - 1] - feats_b[d - 1]))
    return total


def _check_same_dims(v: VideoClip, v_prime: VideoClip) -> None:
    if v.data.shape != v_prime.data.shape:
        raise ValidationError(
            f"clips must share dims: {v.data.shape} vs {v_prime.data.shape}"
        )


def layer_distance(
    v: VideoClip,
    v_prime: VideoClip,
    d: int,
    extractor: FeatureExtractor,
    cfg: DistanceConfig = DistanceConfig(),
) -> float:
    """l2 distance between power-normalized layer-d features of two clips."""
    _check_same_dims(v, v_prime)
    if not 1 <= d <= extractor.num_layers:
        raise ValidationError(
            f"layer index {d} out of range 1..{extractor.num_layers}"
        )
    fa = power_normalize(extractor.extract(v)[d - 1], cfg.alpha)
    fb = power_normalize(extractor.extract(v_prime)[d - 1], cfg.alpha)
    return float(np.linalg.norm(fa.ravel() - fb.ravel()))


def total_distance(
    v: VideoClip,
    v_prime: VideoClip,
    extractor: FeatureExtractor,
    cfg: DistanceConfig = DistanceConfig(),
) -> float:
    """Sum of per-layer distances over the configured layers (default all)."""
    _check_same_dims(v, v_prime)
    fa = normalized_features(extractor, v, cfg)
    fb = normalized_features(extractor, v_prime, cfg)
    return distance_between_normalized(fa, fb, cfg)
