"""Derivative-free search over noise-parameter boxes.

Particle swarm optimization is the primary engine; a generational GA,
simulated annealing, and tabu search are drop-in alternates, plus a
uniform random-search baseline for equal-budget comparisons.  All engines
maximize a batch fitness callback over real vectors inside a box; integer
dimensions stay continuous in engine state and are rounded to the nearest
integer only when a vector is turned into noise parameters or reported.

Determinism: every random draw comes from a stream keyed by (seed, role
tag, iteration, particle index), and batch evaluations reduce by input
index, so traces are bit-reproducible regardless of thread count.
"""

from __future__ import annotations

import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError
from .features import DistanceConfig, FeatureExtractor
from .noise import (
    DEFAULT_IMPULSE_DENSITY,
    DEFAULT_NUM_ORIENTATIONS,
    F_RANGE,
    GaborParams,
    K_RANGE,
    LAMBDA_RANGE,
    NoiseSpec,
    OCTAVES_RANGE,
    PHI_RANGE,
    PerlinParams,
    SIGMA_RANGE,
)
from .objective import FitnessConfig, FitnessEvaluator, HybridConfig, HybridEvaluator

BatchEval = Callable[[list], list]


# ---------------------------------------------------------------------------
# Search space


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    kind: str = "continuous"

    def __post_init__(self):
        if self.kind not in ("continuous", "integer"):
            raise ValidationError(f"kind must be continuous|integer, got {self.kind!r}")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValidationError(f"bounds must be finite for {self.name}")
        if not self.lower < self.upper:
            raise ValidationError(
                f"need lower < upper for {self.name}, got [{self.lower}, {self.upper}]"
            )


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ValidationError("search space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate dimension names in {names}")
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list:
        return [d.name for d in self.dims]

    @property
    def lowers(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims], dtype=np.float64)

    @property
    def uppers(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims], dtype=np.float64)

    @property
    def widths(self) -> np.ndarray:
        return self.uppers - self.lowers

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lowers, self.uppers, size=(n, len(self)))

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lowers, self.uppers)

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lowers) and np.all(x <= self.uppers))

    def point_dict(self, x: np.ndarray) -> dict:
        """Named point with integer dims rounded to the nearest integer."""
        out = {}
        for d, v in zip(self.dims, np.asarray(x, dtype=np.float64)):
            out[d.name] = int(np.rint(v)) if d.kind == "integer" else float(v)
        return out


def perlin_space() -> SearchSpace:
    return SearchSpace(
        (
            Dim("lambda_x", *LAMBDA_RANGE),
            Dim("lambda_y", *LAMBDA_RANGE),
            Dim("lambda_t", *LAMBDA_RANGE),
            Dim("num_octaves", *OCTAVES_RANGE, kind="integer"),
            Dim("phi", *PHI_RANGE),
        )
    )


def gabor_space() -> SearchSpace:
    return SearchSpace(
        (
            Dim("K", *K_RANGE),
            Dim("sigma", *SIGMA_RANGE),
            Dim("F", *F_RANGE),
        )
    )


def space_for(variant: str) -> SearchSpace:
    if variant == "perlin":
        return perlin_space()
    if variant == "gabor":
        return gabor_space()
    raise ValidationError(f"no search space for variant {variant!r}")


def spec_from_point(
    variant: str,
    point: dict,
    T: int,
    epsilon: float,
    seed: int = 0,
    impulse_density: float = DEFAULT_IMPULSE_DENSITY,
    num_orientations: int = DEFAULT_NUM_ORIENTATIONS,
    gabor_seed: int = 0,
) -> NoiseSpec:
    """Build a NoiseSpec from a named search point plus fixed settings."""
    if variant == "perlin":
        params = PerlinParams(
            lambda_x=point["lambda_x"],
            lambda_y=point["lambda_y"],
            lambda_t=point["lambda_t"],
            num_octaves=int(point["num_octaves"]),
            phi=point["phi"],
        )
    elif variant == "gabor":
        params = GaborParams(
            K=point["K"],
            sigma=point["sigma"],
            F=point["F"],
            impulse_density=impulse_density,
            num_orientations=num_orientations,
            seed=gabor_seed,
        )
    else:
        raise ValidationError(f"unknown variant {variant!r}")
    return NoiseSpec(variant=variant, params=params, T=T, epsilon=epsilon, seed=seed)


# ---------------------------------------------------------------------------
# Reports and helpers


@dataclass(frozen=True)
class OptimizerReport:
    """Outcome of one optimization run.

    trace holds the best-so-far fitness per iteration (index 0 is the
    initial sample); current_trace additionally records the walker's
    current fitness for annealing.
    """

    best_params: dict
    best_fitness: float
    trace: list
    evals: int
    seconds: float
    algorithm: str
    current_trace: Optional[list] = None

    def to_dict(self) -> dict:
        out = {
            "best_params": self.best_params,
            "best_fitness": self.best_fitness,
            "trace": list(self.trace),
            "evals": self.evals,
            "seconds": self.seconds,
            "algorithm": self.algorithm,
        }
        if self.current_trace is not None:
            out["current_trace"] = list(self.current_trace)
        return out


def as_batch(objective: Callable[[np.ndarray], float], threads: int = 1) -> BatchEval:
    """Lift a scalar objective to an index-ordered batch callback."""

    def batch(vectors: list) -> list:
        if threads <= 1 or len(vectors) <= 1:
            return [float(objective(v)) for v in vectors]
        results = [0.0] * len(vectors)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(objective, v): i for i, v in enumerate(vectors)}
            for fut in as_completed(futures):
                results[futures[fut]] = float(fut.result())
        return results

    return batch


# ---------------------------------------------------------------------------
# Particle swarm


@dataclass(frozen=True)
class PSOConfig:
    swarm_size: int = 20
    c1: float = 2.0
    c2: float = 2.0
    w_start: float = 1.2
    w_factor: float = 0.5
    w_end: float = 0.4
    max_iters: int = 40
    seed: int = 0
    velocity_clamp: float = 0.5  # |v| cap as a fraction of box width

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValidationError(f"swarm_size must be >= 2, got {self.swarm_size}")
        if self.max_iters < 0:
            raise ValidationError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValidationError("c1 and c2 must be >= 0")
        if self.w_end > self.w_start:
            raise ValidationError(
                f"need w_end <= w_start, got {self.w_end} > {self.w_start}"
            )
        if self.w_factor <= 0:
            raise ValidationError(f"w_factor must be > 0, got {self.w_factor}")


@dataclass(frozen=True)
class SwarmState:
    positions: np.ndarray  # (m, d)
    velocities: np.ndarray  # (m, d)
    pbest_positions: np.ndarray  # (m, d)
    pbest_fitness: np.ndarray  # (m,)
    leader_position: np.ndarray  # (d,)
    leader_fitness: float
    iteration: int
    inertia: float

    def validate(self, space: SearchSpace) -> None:
        if not np.all(self.positions >= space.lowers) or not np.all(
            self.positions <= space.uppers
        ):
            raise ValidationError("swarm positions escaped the search box")
        best = int(np.argmax(self.pbest_fitness))
        if self.leader_fitness != float(self.pbest_fitness[best]):
            raise ValidationError("leader fitness out of sync with personal bests")


def pso_init(space: SearchSpace, cfg: PSOConfig, eval_batch: BatchEval) -> SwarmState:
    """Uniform initial swarm with zero velocities; leader from the sample."""
    rng = np.random.default_rng([cfg.seed, 100])
    positions = space.sample(rng, cfg.swarm_size)
    fits = np.array(eval_batch(list(positions)), dtype=np.float64)
    best = int(np.argmax(fits))  # ties resolve to the lowest index
    return SwarmState(
        positions=positions,
        velocities=np.zeros_like(positions),
        pbest_positions=positions.copy(),
        pbest_fitness=fits,
        leader_position=positions[best].copy(),
        leader_fitness=float(fits[best]),
        iteration=0,
        inertia=cfg.w_start,
    )


def pso_step(
    state: SwarmState, space: SearchSpace, cfg: PSOConfig, eval_batch: BatchEval
) -> SwarmState:
    """One swarm iteration; returns the new state, leaving the input intact.

    Per particle: v <- W v + c1 r1 (pbest - x) + c2 r2 (leader - x), then
    x <- x + v projected into the box.  After the bests update, inertia
    decays by (w_start - w_end)/(k * w_factor) with a floor at w_end.
    """
    k = state.iteration + 1
    vmax = cfg.velocity_clamp * space.widths
    new_v = np.empty_like(state.velocities)
    for i in range(cfg.swarm_size):
        rng = np.random.default_rng([cfg.seed, 101, k, i])
        r1 = rng.uniform(size=len(space))
        r2 = rng.uniform(size=len(space))
        v = (
            state.inertia * state.velocities[i]
            + cfg.c1 * r1 * (state.pbest_positions[i] - state.positions[i])
            + cfg.c2 * r2 * (state.leader_position - state.positions[i])
        )
        new_v[i] = np.clip(v, -vmax, vmax)
    new_x = space.project(state.positions + new_v)

    # evaluation failures propagate here, before any state is derived
    fits = np.array(eval_batch(list(new_x)), dtype=np.float64)

    improved = fits > state.pbest_fitness
    pbest_pos = np.where(improved[:, None], new_x, state.pbest_positions)
    pbest_fit = np.where(improved, fits, state.pbest_fitness)
    best = int(np.argmax(pbest_fit))
    raw_w = state.inertia - (cfg.w_start - cfg.w_end) / (k * cfg.w_factor)
    return SwarmState(
        positions=new_x,
        velocities=new_v,
        pbest_positions=pbest_pos,
        pbest_fitness=pbest_fit,
        leader_position=pbest_pos[best].copy(),
        leader_fitness=float(pbest_fit[best]),
        iteration=k,
        inertia=max(cfg.w_end, raw_w),
    )


def pso_optimize(
    space: SearchSpace, eval_batch: BatchEval, cfg: PSOConfig = PSOConfig()
) -> OptimizerReport:
    start = time.perf_counter()
    state = pso_init(space, cfg, eval_batch)
    trace = [state.leader_fitness]
    for _ in range(cfg.max_iters):
        state = pso_step(state, space, cfg, eval_batch)
        trace.append(state.leader_fitness)
    return OptimizerReport(
        best_params=space.point_dict(state.leader_position),
        best_fitness=state.leader_fitness,
        trace=trace,
        evals=cfg.swarm_size * (cfg.max_iters + 1),
        seconds=time.perf_counter() - start,
        algorithm="pso",
    )


# ---------------------------------------------------------------------------
# Genetic algorithm


@dataclass(frozen=True)
class GAConfig:
    population: int = 20
    max_iters: int = 40
    tournament: int = 2
    crossover_prob: float = 0.5
    mutation_rate: float = 0.005
    mutation_scale: float = 0.1  # Gaussian step as a fraction of box width
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValidationError(f"population must be >= 2, got {self.population}")
        if self.max_iters < 0:
            raise ValidationError(f"max_iters must be >= 0, got {self.max_iters}")
        if not 2 <= self.tournament <= self.population:
            raise ValidationError("tournament size must be in [2, population]")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValidationError("crossover_prob must be in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValidationError("mutation_rate must be in [0, 1]")


def ga_optimize(
    space: SearchSpace, eval_batch: BatchEval, cfg: GAConfig = GAConfig()
) -> OptimizerReport:
    """Generational GA: tournament selection, uniform crossover with 50%
    per-gene mixing, per-gene Gaussian mutation, single-elite carryover.
    The mutation step shrinks quadratically over the run (from
    mutation_scale of the box width toward zero) so late generations
    fine-tune instead of jumping.

    Evaluations: population + max_iters * (population - 1).
    """
    start = time.perf_counter()
    rng0 = np.random.default_rng([cfg.seed, 200])
    pop = space.sample(rng0, cfg.population)
    fits = np.array(eval_batch(list(pop)), dtype=np.float64)
    evals = cfg.population
    best = int(np.argmax(fits))
    trace = [float(fits[best])]

    def tournament(rng) -> np.ndarray:
        idx = rng.integers(0, cfg.population, cfg.tournament)
        return pop[idx[np.argmax(fits[idx])]]

    for gen in range(1, cfg.max_iters + 1):
        rng = np.random.default_rng([cfg.seed, 201, gen])
        elite = pop[int(np.argmax(fits))].copy()
        elite_fit = float(np.max(fits))
        remaining = 1.0 - gen / (cfg.max_iters + 1.0)
        sigma = cfg.mutation_scale * space.widths * remaining**2
        children = []
        for _ in range(cfg.population - 1):
            a = tournament(rng)
            b = tournament(rng)
            if rng.uniform() < cfg.crossover_prob:
                mask = rng.uniform(size=len(space)) < 0.5
                child = np.where(mask, a, b).astype(np.float64)
            else:
                child = a.copy()
            mutate = rng.uniform(size=len(space)) < cfg.mutation_rate
            if np.any(mutate):
                child = child + mutate * rng.normal(size=len(space)) * sigma
            children.append(space.project(child))
        child_fits = np.array(eval_batch(children), dtype=np.float64)
        evals += len(children)
        pop = np.vstack([elite[None, :], np.array(children)])
        fits = np.concatenate([[elite_fit], child_fits])
        trace.append(float(np.max(fits)))

    best = int(np.argmax(fits))
    return OptimizerReport(
        best_params=space.point_dict(pop[best]),
        best_fitness=float(fits[best]),
        trace=trace,
        evals=evals,
        seconds=time.perf_counter() - start,
        algorithm="ga",
    )


# ---------------------------------------------------------------------------
# Simulated annealing


@dataclass(frozen=True)
class SAConfig:
    t0: float = 5000.0
    cooling: float = 0.99
    max_iters: int = 800
    proposal_scale: float = 0.05  # Gaussian step as a fraction of box width
    seed: int = 0

    def __post_init__(self):
        if self.t0 < 0:
            raise ValidationError(f"t0 must be >= 0, got {self.t0}")
        if not 0.0 < self.cooling < 1.0:
            raise ValidationError(f"cooling must be in (0, 1), got {self.cooling}")
        if self.max_iters < 0:
            raise ValidationError(f"max_iters must be >= 0, got {self.max_iters}")


def accept_probability(delta_worse: float, temperature: float) -> float:
    """Metropolis acceptance for a move worse by delta_worse (>= 0)."""
    if delta_worse <= 0:
        return 1.0
    if temperature <= 0:
        return 0.0  # zero-temperature limit: pure hill climbing
    return math.exp(-delta_worse / temperature)


def sa_optimize(
    space: SearchSpace, eval_batch: BatchEval, cfg: SAConfig = SAConfig()
) -> OptimizerReport:
    """Single-chain annealing with box-projected Gaussian proposals and
    geometric cooling.  Evaluations: 1 + max_iters.
    """
    start = time.perf_counter()
    rng0 = np.random.default_rng([cfg.seed, 300])
    x = space.sample(rng0, 1)[0]
    f = float(eval_batch([x])[0])
    best_x, best_f = x.copy(), f
    temp = cfg.t0
    trace = [best_f]
    current = [f]
    for j in range(1, cfg.max_iters + 1):
        rng = np.random.default_rng([cfg.seed, 301, j])
        prop = space.project(x + rng.normal(size=len(space)) * cfg.proposal_scale * space.widths)
        fp = float(eval_batch([prop])[0])
        if rng.uniform() < accept_probability(f - fp, temp):
            x, f = prop, fp
        if f > best_f:
            best_x, best_f = x.copy(), f
        temp *= cfg.cooling
        trace.append(best_f)
        current.append(f)
    return OptimizerReport(
        best_params=space.point_dict(best_x),
        best_fitness=best_f,
        trace=trace,
        evals=1 + cfg.max_iters,
        seconds=time.perf_counter() - start,
        algorithm="sa",
        current_trace=current,
    )


# ---------------------------------------------------------------------------
# Tabu search


@dataclass(frozen=True)
class TSConfig:
    tabu_size: int = 4
    step_frac: float = 0.02  # move step as a fraction of box width
    max_iters: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.tabu_size < 0:
            raise ValidationError(f"tabu_size must be >= 0, got {self.tabu_size}")
        if not 0.0 < self.step_frac <= 1.0:
            raise ValidationError(f"step_frac must be in (0, 1], got {self.step_frac}")
        if self.max_iters < 0:
            raise ValidationError(f"max_iters must be >= 0, got {self.max_iters}")


def ts_optimize(
    space: SearchSpace, eval_batch: BatchEval, cfg: TSConfig = TSConfig()
) -> OptimizerReport:
    """Neighborhood search over per-dimension +/- steps with a tabu list
    of recent move keys (dimension, sign) and best-beating aspiration.

    Evaluations: 1 + max_iters * 2 * dimensions.
    """
    start = time.perf_counter()
    rng0 = np.random.default_rng([cfg.seed, 400])
    x = space.sample(rng0, 1)[0]
    f = float(eval_batch([x])[0])
    best_x, best_f = x.copy(), f
    steps = cfg.step_frac * space.widths
    tabu = deque(maxlen=cfg.tabu_size) if cfg.tabu_size else deque(maxlen=1)
    trace = [best_f]
    evals = 1
    for _ in range(cfg.max_iters):
        moves, candidates = [], []
        for d in range(len(space)):
            for sign in (1, -1):
                c = x.copy()
                c[d] += sign * steps[d]
                moves.append((d, sign))
                candidates.append(space.project(c))
        fits = np.array(eval_batch(candidates), dtype=np.float64)
        evals += len(candidates)
        chosen = None
        for idx in np.argsort(-fits):  # best first; stable for ties
            key = moves[idx]
            if cfg.tabu_size and key in tabu and fits[idx] <= best_f:
                continue  # tabu, and aspiration does not fire
            chosen = int(idx)
            break
        if chosen is None:
            chosen = int(np.argmax(fits))  # everything tabu: take the best
        x, f = candidates[chosen], float(fits[chosen])
        if cfg.tabu_size:
            tabu.append(moves[chosen])
        if f > best_f:
            best_x, best_f = x.copy(), f
        trace.append(best_f)
    return OptimizerReport(
        best_params=space.point_dict(best_x),
        best_fitness=best_f,
        trace=trace,
        evals=evals,
        seconds=time.perf_counter() - start,
        algorithm="ts",
    )


# ---------------------------------------------------------------------------
# Random-search baseline


def random_search(
    space: SearchSpace, eval_batch: BatchEval, num_evals: int, seed: int = 0, chunk: int = 32
) -> OptimizerReport:
    """Uniform sampling at an equal evaluation budget."""
    if num_evals < 1:
        raise ValidationError(f"num_evals must be >= 1, got {num_evals}")
    start = time.perf_counter()
    rng = np.random.default_rng([seed, 500])
    points = space.sample(rng, num_evals)
    best_x, best_f = None, -math.inf
    trace = []
    for lo in range(0, num_evals, chunk):
        block = list(points[lo : lo + chunk])
        for x, fval in zip(block, eval_batch(block)):
            if fval > best_f:
                best_x, best_f = x, float(fval)
            trace.append(best_f)
    return OptimizerReport(
        best_params=space.point_dict(best_x),
        best_fitness=best_f,
        trace=trace,
        evals=num_evals,
        seconds=time.perf_counter() - start,
        algorithm="random",
    )


ENGINES = {
    "pso": (pso_optimize, PSOConfig),
    "ga": (ga_optimize, GAConfig),
    "sa": (sa_optimize, SAConfig),
    "ts": (ts_optimize, TSConfig),
}


# ---------------------------------------------------------------------------
# Wiring onto the attack objective


def _spec_batch(
    space: SearchSpace,
    variant: str,
    evaluator,
    threads: int,
    spec_kwargs: dict,
) -> BatchEval:
    def batch(vectors: list) -> list:
        specs = [
            spec_from_point(variant, space.point_dict(v), **spec_kwargs)
            for v in vectors
        ]
        return evaluator.evaluate_many(specs, threads)

    return batch


def _run_engine(
    algorithm: str,
    extractor: FeatureExtractor,
    videos: list,
    space: SearchSpace,
    cfg,
    variant: str,
    fitness_cfg: FitnessConfig,
    dcfg: DistanceConfig,
    T: int,
    epsilon: float,
    noise_seed: int,
    impulse_density: float,
    num_orientations: int,
    gabor_seed: int,
    hybrid: Optional[HybridConfig],
    threads: int,
) -> OptimizerReport:
    evaluator = FitnessEvaluator(extractor, videos, fitness_cfg, dcfg)
    if hybrid is not None:
        evaluator = HybridEvaluator(evaluator, hybrid)
    spec_kwargs = dict(
        T=T,
        epsilon=epsilon,
        seed=noise_seed,
        impulse_density=impulse_density,
        num_orientations=num_orientations,
        gabor_seed=gabor_seed,
    )
    batch = _spec_batch(space, variant, evaluator, threads, spec_kwargs)
    engine, _ = ENGINES[algorithm]
    return engine(space, batch, cfg)


def noise_opt(
    extractor: FeatureExtractor,
    videos: list,
    space: SearchSpace,
    cfg: PSOConfig = PSOConfig(),
    variant: str = "perlin",
    fitness_cfg: FitnessConfig = FitnessConfig(),
    *,
    dcfg: DistanceConfig = DistanceConfig(),
    T: int = 16,
    epsilon: float = 8.0,
    noise_seed: int = 0,
    impulse_density: float = DEFAULT_IMPULSE_DENSITY,
    num_orientations: int = DEFAULT_NUM_ORIENTATIONS,
    gabor_seed: int = 0,
    hybrid: Optional[HybridConfig] = None,
    threads: int = 1,
) -> OptimizerReport:
    """Swarm search for the noise parameters maximizing the attack fitness."""
    _check_space_variant(space, variant)
    return _run_engine(
        "pso", extractor, videos, space, cfg, variant, fitness_cfg, dcfg,
        T, epsilon, noise_seed, impulse_density, num_orientations, gabor_seed,
        hybrid, threads,
    )


def ga_opt(extractor, videos, space, cfg: GAConfig = GAConfig(), variant="perlin",
           fitness_cfg: FitnessConfig = FitnessConfig(), **kw) -> OptimizerReport:
    """GA alternate with the same wiring as noise_opt."""
    _check_space_variant(space, variant)
    return _run_engine("ga", extractor, videos, space, cfg, variant, fitness_cfg,
                       **_engine_kwargs(kw))


def sa_opt(extractor, videos, space, cfg: SAConfig = SAConfig(), variant="perlin",
           fitness_cfg: FitnessConfig = FitnessConfig(), **kw) -> OptimizerReport:
    """Annealing alternate with the same wiring as noise_opt."""
    _check_space_variant(space, variant)
    return _run_engine("sa", extractor, videos, space, cfg, variant, fitness_cfg,
                       **_engine_kwargs(kw))


def ts_opt(extractor, videos, space, cfg: TSConfig = TSConfig(), variant="perlin",
           fitness_cfg: FitnessConfig = FitnessConfig(), **kw) -> OptimizerReport:
    """Tabu-search alternate with the same wiring as noise_opt."""
    _check_space_variant(space, variant)
    return _run_engine("ts", extractor, videos, space, cfg, variant, fitness_cfg,
                       **_engine_kwargs(kw))


def _engine_kwargs(kw: dict) -> dict:
    out = dict(
        dcfg=kw.pop("dcfg", DistanceConfig()),
        T=kw.pop("T", 16),
        epsilon=kw.pop("epsilon", 8.0),
        noise_seed=kw.pop("noise_seed", 0),
        impulse_density=kw.pop("impulse_density", DEFAULT_IMPULSE_DENSITY),
        num_orientations=kw.pop("num_orientations", DEFAULT_NUM_ORIENTATIONS),
        gabor_seed=kw.pop("gabor_seed", 0),
        hybrid=kw.pop("hybrid", None),
        threads=kw.pop("threads", 1),
    )
    if kw:
        raise ValidationError(f"unknown options {sorted(kw)}")
    return out


def _check_space_variant(space: SearchSpace, variant: str) -> None:
    expected = space_for(variant).names
    if space.names != expected:
        raise ValidationError(
            f"space dims {space.names} do not match {variant} parameters {expected}"
        )
