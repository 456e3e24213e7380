"""Command-line surface: generate | optimize | inject | evaluate | stream | bench.

Every run writes a manifest holding the verbatim argument vector plus the
resolved configuration; replaying that argv reproduces the run, and the
manifest's `deterministic_outputs` are byte-identical across replays and
thread counts.  Exit codes: 0 success, 2 validation error, 3 protocol
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ProtocolError, TensorFormatError, U3DError, ValidationError
from .features import BuiltinExtractor, DistanceConfig
from .manifest import build_manifest, write_manifest
from .noise import (
    DEFAULT_IMPULSE_DENSITY,
    DEFAULT_NUM_ORIENTATIONS,
    GaborParams,
    NoiseSpec,
    PerlinParams,
    PerturbationVolume,
    generate_volume,
    load_spec,
    save_spec,
)
from .objective import BuiltinOracle, FitnessConfig, HybridConfig
from .optim import (
    GAConfig,
    PSOConfig,
    SAConfig,
    TSConfig,
    ga_opt,
    noise_opt,
    sa_opt,
    space_for,
    spec_from_point,
    ts_opt,
)
from .protocol import ExternalExtractor, ExternalOracle, connect_endpoint
from .reports import (
    evaluate_attack,
    plot_bench,
    plot_latency,
    plot_offset_sr,
    plot_traces,
    write_bench_csv,
    write_eval_csv,
)
from .stream import FRAME_BUDGET, clip_frames, pipe_frames, run_stream
from .tensorio import (
    apply_perturbation,
    load_clip,
    load_tensor,
    pixel_metrics,
    save_tensor,
)

PROG = "u3d"


def _json_dump(obj, path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def _load_videos(directory) -> tuple:
    root = Path(directory)
    if not root.is_dir():
        raise ValidationError(f"video directory {root} does not exist")
    paths = sorted(root.glob("*.u3dt"))
    if not paths:
        raise ValidationError(f"no .u3dt clips found in {root}")
    return [load_clip(p) for p in paths], [p.name for p in paths]


def _make_extractor(args):
    if args.extractor == "builtin":
        return BuiltinExtractor(seed=args.extractor_seed)
    return ExternalExtractor(connect_endpoint(args.extractor))


def _make_labeler(args, videos):
    if args.oracle == "builtin":
        return BuiltinOracle(args.oracle_seed, videos)
    return ExternalOracle(connect_endpoint(args.oracle), videos)


def _distance_config(args) -> DistanceConfig:
    mask = None
    if getattr(args, "layer_mask", None):
        mask = tuple(int(s) for s in args.layer_mask.split(","))
    return DistanceConfig(alpha=args.alpha, layer_mask=mask)


def _fitness_config(args) -> FitnessConfig:
    return FitnessConfig(
        sample_count=args.samples,
        T=None,
        rng_seed=args.seed,
        exhaustive=args.exhaustive,
        window=args.window,
    )


def _spec_from_args(args) -> NoiseSpec:
    if args.spec:
        return load_spec(args.spec)
    if args.variant == "perlin":
        params = PerlinParams(
            lambda_x=args.lambda_x,
            lambda_y=args.lambda_y,
            lambda_t=args.lambda_t,
            num_octaves=args.octaves,
            phi=args.phi,
        )
    else:
        params = GaborParams(
            K=args.K,
            sigma=args.sigma,
            F=args.F,
            impulse_density=args.impulse_density,
            num_orientations=args.orientations,
            seed=args.gabor_seed,
        )
    return NoiseSpec(
        variant=args.variant, params=params, T=args.T, epsilon=args.epsilon,
        seed=args.seed,
    )


def _load_volume_arg(args, height: int, width: int) -> PerturbationVolume:
    """Resolve --volume (stored tensor) or --spec (regenerate at dims)."""
    if args.volume:
        tensor = load_tensor(args.volume)
        if tensor.ndim != 3:
            raise ValidationError(
                f"volume file must hold a (T, H, W) tensor, got ndim {tensor.ndim}"
            )
        peak = float(np.max(np.abs(tensor))) if tensor.size else 0.0
        placeholder = NoiseSpec(
            "perlin", PerlinParams(16.0, 16.0, 16.0, 1, 1.0),
            T=tensor.shape[0], epsilon=max(peak, 1e-9),
        )
        return PerturbationVolume(volume=tensor, epsilon=max(peak, 1e-9), spec=placeholder)
    if args.spec:
        spec = _spec_source(args.spec)
        return generate_volume(spec, height, width)
    raise ValidationError("provide --volume or --spec")


def _spec_source(path) -> NoiseSpec:
    """Accept a plain spec JSON or an optimizer params file with a spec."""
    with open(path) as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    if isinstance(payload.get("spec"), dict):
        payload = payload["spec"]
    return NoiseSpec.from_dict(payload)


def _emit_manifest(args, argv, command, config, inputs, outputs, det_outputs, seconds):
    path = args.manifest_out or str(outputs[0]) + ".manifest.json"
    seeds = {k: v for k, v in config.items() if "seed" in k}
    write_manifest(
        build_manifest(
            command=command,
            argv=argv,
            config=config,
            inputs=inputs,
            outputs=outputs,
            deterministic_outputs=det_outputs,
            seeds=seeds,
            seconds=seconds,
        ),
        path,
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(args, argv) -> None:
    start = time.perf_counter()
    spec = _spec_from_args(args)
    vol = generate_volume(spec, args.H, args.W)
    out = Path(args.out)
    save_tensor(vol.volume, out)
    spec_path = out.with_suffix(".spec.json")
    save_spec(spec, spec_path)
    config = {
        "spec": spec.to_dict(),
        "H": args.H,
        "W": args.W,
        "seed": args.seed,
        "certified_epsilon": vol.epsilon,
    }
    _emit_manifest(
        args, argv, "generate", config,
        inputs=[args.spec] if args.spec else [],
        outputs=[str(out), str(spec_path)],
        det_outputs=[str(out), str(spec_path)],
        seconds=time.perf_counter() - start,
    )
    print(f"wrote {out} ({vol.shape[0]}x{vol.shape[1]}x{vol.shape[2]}, "
          f"bound {vol.epsilon})")


def _engine_config(args):
    if args.optimizer == "pso":
        return PSOConfig(
            swarm_size=args.swarm_size, c1=args.c1, c2=args.c2,
            w_start=args.w_start, w_factor=args.w_factor, w_end=args.w_end,
            max_iters=args.iters, seed=args.seed,
        )
    if args.optimizer == "ga":
        return GAConfig(
            population=args.population, max_iters=args.iters,
            tournament=args.tournament, crossover_prob=args.crossover_prob,
            mutation_rate=args.mutation_rate, seed=args.seed,
        )
    if args.optimizer == "sa":
        return SAConfig(
            t0=args.t0, cooling=args.cooling, max_iters=args.sa_iters,
            proposal_scale=args.proposal_scale, seed=args.seed,
        )
    return TSConfig(
        tabu_size=args.tabu_size, step_frac=args.step_frac,
        max_iters=args.ts_iters, seed=args.seed,
    )


def _run_optimizer(args, extractor, videos, hybrid=None):
    space = space_for(args.variant)
    cfg = _engine_config(args)
    runner = {"pso": noise_opt, "ga": ga_opt, "sa": sa_opt, "ts": ts_opt}[args.optimizer]
    return runner(
        extractor, videos, space, cfg, args.variant, _fitness_config(args),
        dcfg=_distance_config(args),
        T=args.T, epsilon=args.epsilon, noise_seed=args.seed,
        impulse_density=args.impulse_density,
        num_orientations=args.orientations, gabor_seed=args.gabor_seed,
        hybrid=hybrid, threads=args.threads,
    )


def _best_spec(args, report) -> NoiseSpec:
    return spec_from_point(
        args.variant, report.best_params, T=args.T, epsilon=args.epsilon,
        seed=args.seed, impulse_density=args.impulse_density,
        num_orientations=args.orientations, gabor_seed=args.gabor_seed,
    )


def cmd_optimize(args, argv) -> None:
    start = time.perf_counter()
    videos, names = _load_videos(args.videos)
    extractor = _make_extractor(args)
    hybrid = None
    if args.hybrid:
        n = args.query_set or len(videos)
        if n > len(videos):
            raise ValidationError(
                f"query set of {n} exceeds the {len(videos)} available clips"
            )
        oracle = _make_labeler(args, videos[:n])
        hybrid = HybridConfig(omega=args.omega, query_budget=args.budget, oracle=oracle)
    report = _run_optimizer(args, extractor, videos, hybrid)
    best = _best_spec(args, report)

    params_payload = {
        "variant": args.variant,
        "best_params": report.best_params,
        "best_fitness": report.best_fitness,
        "trace": report.trace,
        "evals": report.evals,
        "spec": best.to_dict(),
    }
    _json_dump(params_payload, args.out_params)
    _json_dump(report.to_dict(), args.out_report)
    outputs = [args.out_params, args.out_report]
    if not args.no_plots:
        fig = str(Path(args.out_report).with_suffix(".png"))
        plot_traces({args.optimizer: report.trace}, fig)
        outputs.append(fig)
    config = {
        "videos": names,
        "variant": args.variant,
        "optimizer": args.optimizer,
        "engine": dataclasses.asdict(_engine_config(args)),
        "T": args.T,
        "epsilon": args.epsilon,
        "samples": args.samples,
        "exhaustive": args.exhaustive,
        "window": args.window,
        "alpha": args.alpha,
        "seed": args.seed,
        "extractor": args.extractor,
        "extractor_seed": args.extractor_seed,
        "gabor_seed": args.gabor_seed,
        "hybrid": bool(args.hybrid),
        "omega": args.omega,
        "budget": args.budget,
        "oracle_seed": args.oracle_seed,
        "threads": args.threads,
    }
    _emit_manifest(
        args, argv, "optimize", config, inputs=[args.videos], outputs=outputs,
        det_outputs=[args.out_params], seconds=time.perf_counter() - start,
    )
    print(f"best fitness {report.best_fitness:.6g} after {report.evals} evals; "
          f"params -> {args.out_params}")


def cmd_inject(args, argv) -> None:
    start = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    outputs = []
    for path in args.clips:
        clip = load_clip(path)
        vol = _load_volume_arg(args, clip.height, clip.width)
        adv = apply_perturbation(clip, vol, args.offset)
        out = out_dir / f"adv_{Path(path).name}"
        save_tensor(adv.data, out)
        metrics = pixel_metrics(clip, adv)
        rows.append(
            {
                "clip": str(path),
                "out": str(out),
                "offset": args.offset,
                "mse": metrics.mse,
                "linf": metrics.linf,
            }
        )
        outputs.append(str(out))
    metrics_path = out_dir / "inject_metrics.json"
    _json_dump(rows, metrics_path)
    outputs.append(str(metrics_path))
    config = {
        "clips": [str(p) for p in args.clips],
        "volume": args.volume,
        "spec": args.spec,
        "offset": args.offset,
        "seed": args.seed,
    }
    _emit_manifest(
        args, argv, "inject", config, inputs=list(args.clips), outputs=outputs,
        det_outputs=outputs, seconds=time.perf_counter() - start,
    )
    print(f"injected {len(args.clips)} clip(s) at offset {args.offset} -> {out_dir}")


def _offsets_from_args(args, period: int) -> list:
    if args.offsets:
        return [int(s) for s in args.offsets.split(",")]
    step = args.offset_step or max(1, period // args.num_offsets)
    return [i * step for i in range(args.num_offsets)]


def cmd_evaluate(args, argv) -> None:
    start = time.perf_counter()
    videos, names = _load_videos(args.videos)
    vol = _load_volume_arg(args, videos[0].height, videos[0].width)
    labeler = _make_labeler(args, videos)
    offsets = _offsets_from_args(args, vol.T)
    report = evaluate_attack(labeler, videos, names, vol, offsets)
    _json_dump(report.to_dict(), args.out)
    csv_path = str(Path(args.out).with_suffix(".csv"))
    write_eval_csv(report, csv_path)
    outputs = [args.out, csv_path]
    if not args.no_plots:
        fig = str(Path(args.out).with_suffix(".png"))
        plot_offset_sr(report, fig)
        outputs.append(fig)
    config = {
        "videos": names,
        "volume": args.volume,
        "spec": args.spec,
        "offsets": offsets,
        "oracle": args.oracle,
        "oracle_seed": args.oracle_seed,
        "seed": args.seed,
    }
    _emit_manifest(
        args, argv, "evaluate", config, inputs=[args.videos],
        outputs=outputs, det_outputs=[args.out, csv_path],
        seconds=time.perf_counter() - start,
    )
    print(f"success rate {report.success_rate:.3f} over {len(offsets)} offsets "
          f"-> {args.out}")


def cmd_stream(args, argv) -> None:
    start = time.perf_counter()
    tensor = load_tensor(args.volume)
    if tensor.ndim != 3:
        raise ValidationError(f"volume must be (T, H, W), got ndim {tensor.ndim}")
    if args.source == "-":
        frames = pipe_frames(sys.stdin.buffer)
    else:
        frames = clip_frames(args.source, repeat=args.repeat)
    sink = None
    close_sink = False
    if args.out == "-":
        sink = sys.stdout.buffer
    elif args.out:
        sink = open(args.out, "wb")
        close_sink = True
    try:
        report, inject_seconds = run_stream(
            frames, tensor, offset=args.offset, sink=sink, budget=args.budget
        )
    finally:
        if close_sink:
            sink.close()
    _json_dump(report.to_dict(), args.report)
    outputs = [args.report] + ([args.out] if args.out and args.out != "-" else [])
    if not args.no_plots:
        fig = str(Path(args.report).with_suffix(".png"))
        plot_latency(inject_seconds, report.budget_seconds, fig)
        outputs.append(fig)
    config = {
        "source": args.source,
        "volume": args.volume,
        "offset": args.offset,
        "repeat": args.repeat,
        "budget": args.budget,
        "seed": args.seed,
    }
    det = [args.out] if args.out and args.out != "-" else []
    _emit_manifest(
        args, argv, "stream", config,
        inputs=[args.source, args.volume], outputs=outputs, det_outputs=det,
        seconds=time.perf_counter() - start,
    )
    print(f"{report.frames} frames: inject mean {report.mean_seconds * 1e3:.3f} ms, "
          f"p95 {report.p95_seconds * 1e3:.3f} ms, budget {report.budget_seconds * 1e3:.1f} ms")


def _bench_budgets(args, dims: int) -> dict:
    budget = args.swarm_size * (args.iters + 1)
    return {
        "pso": PSOConfig(swarm_size=args.swarm_size, max_iters=args.iters),
        "ga": GAConfig(
            population=args.swarm_size,
            max_iters=max(0, round((budget - args.swarm_size) / (args.swarm_size - 1))),
        ),
        "sa": SAConfig(max_iters=budget - 1),
        "ts": TSConfig(max_iters=max(1, round((budget - 1) / (2 * dims)))),
    }


def cmd_bench(args, argv) -> None:
    start = time.perf_counter()
    videos, names = _load_videos(args.videos)
    extractor = _make_extractor(args)
    space = space_for(args.variant)
    configs = _bench_budgets(args, len(space))
    runners = {"pso": noise_opt, "ga": ga_opt, "sa": sa_opt, "ts": ts_opt}
    runs = []
    for rep in range(args.reps):
        for name in ("pso", "ga", "sa", "ts"):
            cfg = dataclasses.replace(configs[name], seed=args.seed + rep)
            report = runners[name](
                extractor, videos, space, cfg, args.variant, _fitness_config(args),
                dcfg=_distance_config(args), T=args.T, epsilon=args.epsilon,
                noise_seed=args.seed, impulse_density=args.impulse_density,
                num_orientations=args.orientations, gabor_seed=args.gabor_seed,
                threads=args.threads,
            )
            spec = spec_from_point(
                args.variant, report.best_params, T=args.T, epsilon=args.epsilon,
                seed=args.seed, impulse_density=args.impulse_density,
                num_orientations=args.orientations, gabor_seed=args.gabor_seed,
            )
            vol = generate_volume(spec, videos[0].height, videos[0].width)
            runs.append(
                {
                    "optimizer": name,
                    "rep": rep,
                    "seed": args.seed + rep,
                    "best_params": report.best_params,
                    "best_fitness": report.best_fitness,
                    "evals": report.evals,
                    "seconds": report.seconds,
                    "volume_mse": float(np.mean(vol.volume.astype(np.float64) ** 2)),
                    "trace": report.trace,
                }
            )
    rows = []
    for name in ("pso", "ga", "sa", "ts"):
        mine = [r for r in runs if r["optimizer"] == name]
        rows.append(
            {
                "optimizer": name,
                "seconds": float(np.mean([r["seconds"] for r in mine])),
                "best_fitness": float(np.mean([r["best_fitness"] for r in mine])),
                "volume_mse": float(np.mean([r["volume_mse"] for r in mine])),
            }
        )
    _json_dump({"rows": rows, "runs": runs}, args.out)
    results_path = str(Path(args.out).with_suffix(".results.json"))
    deterministic_runs = [
        {k: r[k] for k in ("optimizer", "rep", "seed", "best_params",
                           "best_fitness", "evals", "volume_mse", "trace")}
        for r in runs
    ]
    _json_dump(deterministic_runs, results_path)
    csv_path = str(Path(args.out).with_suffix(".csv"))
    write_bench_csv(rows, csv_path)
    outputs = [args.out, results_path, csv_path]
    if not args.no_plots:
        fig = str(Path(args.out).with_suffix(".png"))
        plot_bench(rows, fig)
        traces_fig = str(Path(args.out).with_suffix(".traces.png"))
        plot_traces(
            {name: next(r["trace"] for r in runs if r["optimizer"] == name)
             for name in ("pso", "ga", "sa", "ts")},
            traces_fig,
        )
        outputs += [fig, traces_fig]
    config = {
        "videos": names,
        "variant": args.variant,
        "reps": args.reps,
        "swarm_size": args.swarm_size,
        "iters": args.iters,
        "T": args.T,
        "epsilon": args.epsilon,
        "samples": args.samples,
        "window": args.window,
        "seed": args.seed,
        "extractor_seed": args.extractor_seed,
        "threads": args.threads,
    }
    _emit_manifest(
        args, argv, "bench", config, inputs=[args.videos], outputs=outputs,
        det_outputs=[results_path], seconds=time.perf_counter() - start,
    )
    for row in rows:
        print(f"{row['optimizer']:>6}: fitness {row['best_fitness']:.6g}  "
              f"time {row['seconds']:.2f}s  volume mse {row['volume_mse']:.3f}")


# ---------------------------------------------------------------------------
# Parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for fitness evaluation")
    p.add_argument("--manifest-out", default=None,
                   help="manifest path (default: <first output>.manifest.json)")
    p.add_argument("--no-plots", action="store_true",
                   help="skip PNG figure rendering")


def _add_noise_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=("perlin", "gabor"), default="perlin")
    p.add_argument("--T", type=int, default=16, help="perturbation period in frames")
    p.add_argument("--epsilon", type=float, default=8.0,
                   help="max absolute pixel deviation")
    p.add_argument("--impulse-density", type=float, default=DEFAULT_IMPULSE_DENSITY)
    p.add_argument("--orientations", type=int, default=DEFAULT_NUM_ORIENTATIONS)
    p.add_argument("--gabor-seed", type=int, default=0)


def _add_fitness(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=8,
                   help="temporal shifts sampled per video")
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate every shift instead of sampling")
    p.add_argument("--window", choices=("first", "random", "all"), default="first",
                   help="how clips longer than the extractor window are used")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="power-normalization exponent")
    p.add_argument("--layer-mask", default=None,
                   help="comma-separated 1-based layer indices (default: all)")


def _add_extractor(p: argparse.ArgumentParser) -> None:
    p.add_argument("--extractor", default="builtin",
                   help='"builtin", "tcp:HOST:PORT", or a command to spawn')
    p.add_argument("--extractor-seed", type=int, default=0)


def _add_oracle(p: argparse.ArgumentParser) -> None:
    p.add_argument("--oracle", default="builtin",
                   help='"builtin", "tcp:HOST:PORT", or a command to spawn')
    p.add_argument("--oracle-seed", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Bounded procedural 3D noise perturbations for video: "
                    "generate, optimize, inject, evaluate, stream, bench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a volume from noise parameters")
    _add_common(g)
    _add_noise_params(g)
    g.add_argument("--spec", default=None, help="noise spec JSON (overrides flags)")
    g.add_argument("--H", type=int, default=112)
    g.add_argument("--W", type=int, default=112)
    g.add_argument("--lambda-x", type=float, default=12.0)
    g.add_argument("--lambda-y", type=float, default=12.0)
    g.add_argument("--lambda-t", type=float, default=24.0)
    g.add_argument("--octaves", type=int, default=3)
    g.add_argument("--phi", type=float, default=6.0)
    g.add_argument("--K", type=float, default=2.0)
    g.add_argument("--sigma", type=float, default=8.0)
    g.add_argument("--F", type=float, default=0.5)
    g.add_argument("--out", default="volume.u3dt")
    g.set_defaults(func=cmd_generate)

    o = sub.add_parser("optimize", help="search noise parameters against a video set")
    _add_common(o)
    _add_noise_params(o)
    _add_fitness(o)
    _add_extractor(o)
    _add_oracle(o)
    o.add_argument("--videos", required=True, help="directory of .u3dt clips")
    o.add_argument("--optimizer", choices=("pso", "ga", "sa", "ts"), default="pso")
    o.add_argument("--swarm-size", type=int, default=20)
    o.add_argument("--iters", type=int, default=40, help="pso/ga iterations")
    o.add_argument("--c1", type=float, default=2.0)
    o.add_argument("--c2", type=float, default=2.0)
    o.add_argument("--w-start", type=float, default=1.2)
    o.add_argument("--w-factor", type=float, default=0.5)
    o.add_argument("--w-end", type=float, default=0.4)
    o.add_argument("--population", type=int, default=20)
    o.add_argument("--tournament", type=int, default=2)
    o.add_argument("--crossover-prob", type=float, default=0.5)
    o.add_argument("--mutation-rate", type=float, default=0.005)
    o.add_argument("--t0", type=float, default=5000.0)
    o.add_argument("--cooling", type=float, default=0.99)
    o.add_argument("--sa-iters", type=int, default=800)
    o.add_argument("--proposal-scale", type=float, default=0.05)
    o.add_argument("--tabu-size", type=int, default=4)
    o.add_argument("--step-frac", type=float, default=0.02)
    o.add_argument("--ts-iters", type=int, default=400)
    o.add_argument("--hybrid", action="store_true",
                   help="add the query-oracle term to the objective")
    o.add_argument("--omega", type=float, default=10.0)
    o.add_argument("--budget", type=int, default=1000,
                   help="max oracle video-queries for the whole run")
    o.add_argument("--query-set", type=int, default=0,
                   help="query videos for the oracle (0: all clips)")
    o.add_argument("--out-params", default="params.json")
    o.add_argument("--out-report", default="report.json")
    o.set_defaults(func=cmd_optimize)

    i = sub.add_parser("inject", help="add a volume to stored clips")
    _add_common(i)
    i.add_argument("--clips", nargs="+", required=True)
    i.add_argument("--volume", default=None, help="stored (T,H,W) volume")
    i.add_argument("--spec", default=None, help="noise spec or optimizer params JSON")
    i.add_argument("--offset", type=int, default=0)
    i.add_argument("--out-dir", default="injected")
    i.set_defaults(func=cmd_inject)

    e = sub.add_parser("evaluate", help="success rates over clips and offsets")
    _add_common(e)
    _add_oracle(e)
    e.add_argument("--videos", required=True)
    e.add_argument("--volume", default=None)
    e.add_argument("--spec", default=None)
    e.add_argument("--offsets", default=None,
                   help="comma-separated start offsets (overrides sweep)")
    e.add_argument("--num-offsets", type=int, default=10)
    e.add_argument("--offset-step", type=int, default=None)
    e.add_argument("--out", default="eval.json")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("stream", help="inject into a frame stream, timing each frame")
    _add_common(s)
    s.add_argument("--source", required=True,
                   help='clip file to replay, or "-" for U3DT frames on stdin')
    s.add_argument("--volume", required=True)
    s.add_argument("--offset", type=int, default=0)
    s.add_argument("--repeat", type=int, default=1, help="clip replay count")
    s.add_argument("--budget", type=float, default=FRAME_BUDGET,
                   help="per-frame time budget in seconds")
    s.add_argument("--out", default=None,
                   help='perturbed frame sink file, or "-" for stdout')
    s.add_argument("--report", default="latency.json")
    s.set_defaults(func=cmd_stream)

    b = sub.add_parser("bench", help="compare optimizers at a matched budget")
    _add_common(b)
    _add_noise_params(b)
    _add_fitness(b)
    _add_extractor(b)
    b.add_argument("--videos", required=True)
    b.add_argument("--swarm-size", type=int, default=20)
    b.add_argument("--iters", type=int, default=40)
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--out", default="bench.json")
    b.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, argv)
        return 0
    except ValidationError as exc:
        print(f"{PROG}: validation error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"{PROG}: protocol error: {exc}", file=sys.stderr)
        return 3
    except (TensorFormatError, OSError) as exc:
        print(f"{PROG}: i/o error: {exc}", file=sys.stderr)
        return 4
    except U3DError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
