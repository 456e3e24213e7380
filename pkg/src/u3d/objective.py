"""Attack objective: expected feature deviation under random temporal
shifts, plus an optional query-oracle term with hard budget metering.

The plain fitness of a noise spec against a video set is

    mean over videos of  E_tau [ total_distance(v, v + shift(xi, tau)) ]

where tau is uniform over the perturbation period (sampled I times per
video, or enumerated exhaustively).  The hybrid objective adds
omega * success_rate(xi) from a label oracle, spending query budget on
every evaluation.
"""

from __future__ import annotations

import hashlib
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BudgetExhausted, ValidationError
from .features import (
    BuiltinExtractor,
    DistanceConfig,
    FeatureExtractor,
    distance_between_normalized,
    normalized_features,
)
from .noise import NoiseSpec, generate_volume
from .tensorio import VideoClip, apply_perturbation

WINDOW_STRATEGIES = ("first", "random", "all")


@dataclass(frozen=True)
class FitnessConfig:
    """Shift-sampling settings.

    sample_count is the number of shifts drawn per video (ignored when
    exhaustive, which enumerates every shift in the period).  T overrides
    the sampling period; None takes it from the noise spec.  window picks
    how clips longer than the extractor window are reduced: their first
    window, one seeded random window, or the mean over consecutive
    windows.
    """

    sample_count: int = 8
    T: Optional[int] = None
    rng_seed: int = 0
    exhaustive: bool = False
    window: str = "first"

    def __post_init__(self):
        if not (isinstance(self.sample_count, (int, np.integer)) and self.sample_count >= 1):
            raise ValidationError(f"sample_count must be >= 1, got {self.sample_count!r}")
        if self.T is not None and not (isinstance(self.T, (int, np.integer)) and self.T >= 1):
            raise ValidationError(f"T must be >= 1 or None, got {self.T!r}")
        if not (isinstance(self.rng_seed, (int, np.integer)) and self.rng_seed >= 0):
            raise ValidationError(f"rng_seed must be a non-negative int, got {self.rng_seed!r}")
        if self.window not in WINDOW_STRATEGIES:
            raise ValidationError(f"window must be one of {WINDOW_STRATEGIES}")


def _video_tag(video) -> int:
    """Stable 64-bit tag for a clip, derived from its pixel bytes."""
    digest = hashlib.sha256(np.ascontiguousarray(video.data).tobytes()).digest()
    return int.from_bytes(digest[:8], "little")


class FitnessEvaluator:
    """Evaluates noise specs against a fixed video set.

    Clean-window features are extracted and power-normalized once at
    construction; each spec evaluation only pays for perturbed windows.
    Instances are safe to share across threads (all shared state is
    read-only after construction).
    """

    def __init__(
        self,
        extractor: FeatureExtractor,
        videos: list,
        cfg: FitnessConfig = FitnessConfig(),
        dcfg: DistanceConfig = DistanceConfig(),
    ):
        if not videos:
            raise ValidationError("video set must be non-empty")
        t_in = extractor.input_frames
        for i, v in enumerate(videos):
            if v.frames < t_in:
                raise ValidationError(
                    f"video {i} has {v.frames} frames; extractor needs {t_in}"
                )
        self.extractor = extractor
        self.videos = list(videos)
        self.cfg = cfg
        self.dcfg = dcfg
        # Sub-streams are keyed by a digest of the pixel data rather than
        # the list position, so fitness does not depend on video order.
        self._tags = [_video_tag(v) for v in self.videos]
        # per video: list of (start frame, window clip, clean normalized features)
        self.windows = []
        for vi, v in enumerate(self.videos):
            starts = self._window_starts(vi, v.frames, t_in)
            entries = []
            for s in starts:
                w = v.window(s, t_in)
                entries.append((s, w, normalized_features(extractor, w, dcfg)))
            self.windows.append(entries)

    def _window_starts(self, vi: int, frames: int, t_in: int) -> list:
        last = frames - t_in
        if self.cfg.window == "first":
            return [0]
        if self.cfg.window == "random":
            rng = np.random.default_rng([self.cfg.rng_seed, 13, self._tags[vi]])
            return [int(rng.integers(0, last + 1))]
        return list(range(0, last + 1, t_in))

    def _shift_weights(self, vi: int, period: int) -> np.ndarray:
        """Weight per distinct shift tau in [0, period): exhaustive gives
        uniform weights; Monte Carlo tallies the sampled draws."""
        if self.cfg.exhaustive:
            return np.full(period, 1.0 / period)
        rng = np.random.default_rng([self.cfg.rng_seed, 11, self._tags[vi]])
        draws = rng.integers(0, period, self.cfg.sample_count)
        return np.bincount(draws, minlength=period) / self.cfg.sample_count

    def evaluate(self, spec: NoiseSpec) -> float:
        period = self.cfg.T if self.cfg.T is not None else spec.T
        volumes = {}  # (H, W) -> PerturbationVolume
        per_video = []
        for vi, entries in enumerate(self.windows):
            h, w = self.videos[vi].height, self.videos[vi].width
            if (h, w) not in volumes:
                volumes[h, w] = generate_volume(spec, h, w)
            vol = volumes[h, w]
            weights = self._shift_weights(vi, period)
            video_sum = 0.0
            for tau in np.flatnonzero(weights):
                acc = 0.0
                for start, window, clean in entries:
                    adv = apply_perturbation(window, vol, start + int(tau))
                    feats = normalized_features(self.extractor, adv, self.dcfg)
                    acc += distance_between_normalized(clean, feats, self.dcfg)
                video_sum += weights[tau] * (acc / len(entries))
            per_video.append(video_sum)
        # fsum is exactly rounded, so the mean does not depend on video order
        return math.fsum(per_video) / len(self.videos)

    def evaluate_many(self, specs: list, threads: int = 1) -> list:
        """Evaluate several specs; results are ordered by input index, so
        the outcome is independent of thread scheduling."""
        if threads <= 1 or len(specs) <= 1:
            return [self.evaluate(s) for s in specs]
        results = [0.0] * len(specs)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(self.evaluate, s): i for i, s in enumerate(specs)}
            for fut in as_completed(futures):
                results[futures[fut]] = fut.result()
        return results


def fitness(
    extractor: FeatureExtractor,
    videos: list,
    spec: NoiseSpec,
    cfg: FitnessConfig = FitnessConfig(),
    dcfg: DistanceConfig = DistanceConfig(),
) -> float:
    """One-shot fitness of a noise spec (see FitnessEvaluator for loops)."""
    return FitnessEvaluator(extractor, videos, cfg, dcfg).evaluate(spec)


# ---------------------------------------------------------------------------
# Query oracles


class QueryOracle(ABC):
    """Black-box label oracle over a fixed query video set.

    success_rate(volume) is the fraction of query videos whose predicted
    label changes when the volume is added (offset 0); it issues one
    query per video and bumps video_queries accordingly.
    """

    @property
    @abstractmethod
    def query_set_size(self) -> int:
        ...

    @abstractmethod
    def success_rate(self, volume) -> float:
        ...


class BuiltinOracle(QueryOracle):
    """Toy target classifier: argmax of a seeded random linear readout
    over channel-pooled features of its own (non-surrogate) extractor.
    """

    num_classes = 10

    def __init__(self, classifier_seed: int, query_videos: list):
        if not query_videos:
            raise ValidationError("oracle needs at least one query video")
        self.extractor = BuiltinExtractor(seed=int(classifier_seed))
        t_in = self.extractor.input_frames
        for i, v in enumerate(query_videos):
            if v.frames < t_in:
                raise ValidationError(
                    f"query video {i} has {v.frames} frames; oracle needs {t_in}"
                )
        self.query_videos = list(query_videos)
        pooled_dim = sum(c for _, c in self.extractor.stages)
        rng = np.random.default_rng([int(classifier_seed), 7])
        self._readout = rng.normal(size=(self.num_classes, pooled_dim))
        self.video_queries = 0
        self._clean_labels = [self.label(v) for v in self.query_videos]

    @property
    def query_set_size(self) -> int:
        return len(self.query_videos)

    def label(self, clip: VideoClip) -> int:
        window = clip.window(0, self.extractor.input_frames)
        feats = self.extractor.extract(window)
        pooled = np.concatenate([f.mean(axis=(0, 1, 2)) for f in feats])
        return int(np.argmax(self._readout @ pooled))

    def success_rate(self, volume) -> float:
        flips = 0
        for v, clean in zip(self.query_videos, self._clean_labels):
            window = v.window(0, self.extractor.input_frames)
            adv = apply_perturbation(window, volume, 0)
            if self.label(adv) != clean:
                flips += 1
            self.video_queries += 1
        return flips / len(self.query_videos)


def builtin_oracle(classifier_seed: int, query_videos: list) -> BuiltinOracle:
    """A deterministic 10-class toy oracle over the given query videos."""
    return BuiltinOracle(classifier_seed, query_videos)


@dataclass
class HybridConfig:
    """Query-term settings: weight, oracle, and a hard query budget.

    `remaining` counts down by the query-set size on every hybrid
    evaluation; an evaluation that cannot be fully paid for raises
    BudgetExhausted before any query is issued.
    """

    omega: float
    query_budget: int
    oracle: QueryOracle
    remaining: int = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega >= 0):
            raise ValidationError(f"omega must be >= 0, got {self.omega}")
        if not (isinstance(self.query_budget, (int, np.integer)) and self.query_budget >= 0):
            raise ValidationError(f"query_budget must be >= 0, got {self.query_budget!r}")
        for attr in ("query_set_size", "success_rate"):
            if not hasattr(self.oracle, attr):
                raise ValidationError(f"oracle lacks required attribute {attr!r}")
        self.remaining = int(self.query_budget)

    def charge(self, n: int) -> None:
        if self.remaining < n:
            raise BudgetExhausted(
                f"need {n} queries, {self.remaining} of {self.query_budget} left"
            )
        self.remaining -= n


def hybrid_fitness(
    extractor: FeatureExtractor,
    videos: list,
    spec: NoiseSpec,
    cfg: FitnessConfig,
    h: HybridConfig,
    dcfg: DistanceConfig = DistanceConfig(),
    evaluator: Optional[FitnessEvaluator] = None,
) -> float:
    """fitness + omega * oracle success rate, paying the query budget.

    Charges the budget (one query per query-set video) before querying;
    the oracle is consulted and charged even at omega = 0.  Raises
    BudgetExhausted, leaving the budget untouched, when the charge cannot
    be met.
    """
    h.charge(h.oracle.query_set_size)
    if evaluator is None:
        evaluator = FitnessEvaluator(extractor, videos, cfg, dcfg)
    base = evaluator.evaluate(spec)
    first = videos[0]
    vol = generate_volume(spec, first.height, first.width)
    rate = h.oracle.success_rate(vol)
    if not 0.0 <= rate <= 1.0:
        raise ValidationError(f"oracle returned rate {rate} outside [0, 1]")
    return base + h.omega * rate


class HybridEvaluator:
    """Spec evaluator that adds the oracle term while budget lasts.

    Once the budget cannot cover another full query round, evaluations
    silently fall back to the plain fitness.  A hard accounting check
    guards the budget invariant on every call.
    """

    def __init__(self, evaluator: FitnessEvaluator, h: HybridConfig):
        self.evaluator = evaluator
        self.h = h
        self._baseline_queries = getattr(h.oracle, "video_queries", 0)

    def evaluate(self, spec: NoiseSpec) -> float:
        try:
            self.h.charge(self.h.oracle.query_set_size)
        except BudgetExhausted:
            return self.evaluator.evaluate(spec)
        base = self.evaluator.evaluate(spec)
        first = self.evaluator.videos[0]
        vol = generate_volume(spec, first.height, first.width)
        rate = self.h.oracle.success_rate(vol)
        used = getattr(self.h.oracle, "video_queries", 0) - self._baseline_queries
        if used > self.h.query_budget:
            raise RuntimeError(
                f"oracle answered {used} queries against budget {self.h.query_budget}"
            )
        return base + self.h.omega * rate

    def evaluate_many(self, specs: list, threads: int = 1) -> list:
        # oracle access is serialized; keep hybrid evaluation single-threaded
        return [self.evaluate(s) for s in specs]
