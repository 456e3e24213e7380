"""Bounded procedural 3D noise perturbations for video.

Construct Perlin- or Gabor-family (x, y, t) noise volumes from compact
parameter sets, search those parameters against a layered video feature
extractor with derivative-free optimizers, and inject the bounded result
into stored clips or live frame streams.
"""

from .errors import (
    BadMagic,
    BudgetExhausted,
    ProtocolError,
    TensorFormatError,
    Truncated,
    U3DError,
    ValidationError,
)
from .features import (
    BuiltinExtractor,
    DistanceConfig,
    FeatureExtractor,
    T_IN,
    distance_between_normalized,
    layer_distance,
    normalized_features,
    power_normalize,
    total_distance,
)
from .manifest import TOOL_VERSION as __version__
from .manifest import build_manifest, load_manifest, replay_argv, write_manifest
from .noise import (
    GaborParams,
    NoiseSpec,
    PerlinParams,
    PerturbationVolume,
    gabor_impulses,
    gabor_kernel,
    gabor_orientations,
    generate_volume,
    kernel_support_area,
    load_spec,
    perlin_base,
    representable_bound,
    save_spec,
    temporal_shift,
    u3dg_raw,
    u3dp_value,
)
from .objective import (
    BuiltinOracle,
    FitnessConfig,
    FitnessEvaluator,
    HybridConfig,
    HybridEvaluator,
    QueryOracle,
    builtin_oracle,
    fitness,
    hybrid_fitness,
)
from .optim import (
    Dim,
    GAConfig,
    OptimizerReport,
    PSOConfig,
    SAConfig,
    SearchSpace,
    SwarmState,
    TSConfig,
    accept_probability,
    as_batch,
    ga_opt,
    ga_optimize,
    gabor_space,
    noise_opt,
    perlin_space,
    pso_init,
    pso_optimize,
    pso_step,
    random_search,
    sa_opt,
    sa_optimize,
    spec_from_point,
    ts_opt,
    ts_optimize,
)
from .protocol import ExternalExtractor, ExternalOracle, external_extract
from .reports import (
    EvalReport,
    evaluate_attack,
    recount_success_rates,
    write_bench_csv,
    write_csv,
    write_eval_csv,
)
from .stream import LatencyReport, clip_frames, pipe_frames, run_stream
from .tensorio import (
    PixelMetricReport,
    VideoClip,
    apply_perturbation,
    iter_tensors,
    load_clip,
    load_tensor,
    pixel_metrics,
    read_tensor,
    save_clip,
    save_tensor,
    tensor_bytes,
    tensor_from_bytes,
    write_tensor,
)
