"""End-to-end tests of the command-line interface (in-process via main())."""

import io
import json
import subprocess
import sys

import numpy as np
import pytest

from u3d import (
    NoiseSpec,
    PerlinParams,
    VideoClip,
    apply_perturbation,
    load_clip,
    load_manifest,
    load_spec,
    load_tensor,
    read_tensor,
    recount_success_rates,
    replay_argv,
    representable_bound,
    save_clip,
    save_spec,
    save_tensor,
    tensor_bytes,
)
from u3d.cli import main

pytestmark = pytest.mark.usefixtures("tmp_path")


def _gen_args(out, T=8, eps=6.0, H=16, W=16, seed=3, extra=()):
    return [
        "generate", "--T", str(T), "--epsilon", str(eps), "--H", str(H),
        "--W", str(W), "--seed", str(seed), "--out", str(out), "--no-plots",
        *extra,
    ]


# ---------------------------------------------------------------------------
# generate


def test_generate_writes_volume_spec_and_manifest(tmp_path):
    out = tmp_path / "vol.u3dt"
    assert main(_gen_args(out)) == 0

    vol = load_tensor(out)
    assert vol.shape == (8, 16, 16)
    assert vol.dtype == np.float32
    assert float(np.max(np.abs(vol))) == representable_bound(6.0)

    spec = load_spec(tmp_path / "vol.spec.json")
    assert spec.T == 8 and spec.epsilon == 6.0 and spec.variant == "perlin"

    manifest = load_manifest(str(out) + ".manifest.json")
    assert manifest["command"] == "generate"
    assert str(out) in manifest["deterministic_outputs"]
    assert manifest["seeds"]["seed"] == 3


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.u3dt", tmp_path / "b.u3dt"
    assert main(_gen_args(a)) == 0
    assert main(_gen_args(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.spec.json").read_text() == (
        tmp_path / "b.spec.json"
    ).read_text()


def test_generate_gabor_variant(tmp_path):
    out = tmp_path / "g.u3dt"
    rc = main(_gen_args(out, T=6, extra=(
        "--variant", "gabor", "--K", "2", "--sigma", "4", "--F", "1.5",
    )))
    assert rc == 0
    assert load_tensor(out).shape == (6, 16, 16)


def test_generate_spec_file_overrides_flags(tmp_path):
    spec = NoiseSpec(
        "perlin", PerlinParams(11.0, 13.0, 17.0, 2, 4.0), T=5, epsilon=3.0, seed=9
    )
    spec_path = tmp_path / "spec.json"
    save_spec(spec, spec_path)
    out = tmp_path / "v.u3dt"
    assert main(_gen_args(out, T=16, extra=("--spec", str(spec_path)))) == 0
    assert load_tensor(out).shape == (5, 16, 16)


def test_generate_replay_from_manifest(tmp_path):
    out = tmp_path / "vol.u3dt"
    assert main(_gen_args(out)) == 0
    first = out.read_bytes()
    manifest = load_manifest(str(out) + ".manifest.json")
    assert main(replay_argv(manifest)) == 0
    assert out.read_bytes() == first


def test_exit_codes(tmp_path):
    # validation error: epsilon must be positive
    assert main(_gen_args(tmp_path / "v.u3dt", eps=0.0)) == 2
    # i/o error: output directory does not exist
    assert main(_gen_args(tmp_path / "missing" / "v.u3dt")) == 4
    # validation error: malformed spec JSON
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(_gen_args(tmp_path / "v.u3dt", extra=("--spec", str(bad)))) == 2
    # i/o error: spec file does not exist
    assert main(
        _gen_args(tmp_path / "v.u3dt", extra=("--spec", str(tmp_path / "nope.json")))
    ) == 4
    # argparse errors: unknown subcommand / missing subcommand / bad choice
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
    assert main(_gen_args(tmp_path / "v.u3dt", extra=("--variant", "wavelet"))) == 2


# ---------------------------------------------------------------------------
# inject


def _constant_clip_file(tmp_path, value=127.0, frames=8, hw=8, name="clip.u3dt"):
    clip = VideoClip(np.full((frames, hw, hw, 3), value, dtype=np.float32))
    path = tmp_path / name
    save_clip(clip, path)
    return path


def test_inject_closed_form_metrics(tmp_path):
    clip_path = _constant_clip_file(tmp_path)
    vol_path = tmp_path / "vol.u3dt"
    save_tensor(np.full((4, 8, 8), 8.0, dtype=np.float32), vol_path)
    out_dir = tmp_path / "adv"

    rc = main([
        "inject", "--clips", str(clip_path), "--volume", str(vol_path),
        "--out-dir", str(out_dir), "--no-plots",
    ])
    assert rc == 0

    adv = load_clip(out_dir / "adv_clip.u3dt")
    assert np.all(adv.data == 135.0)
    rows = json.loads((out_dir / "inject_metrics.json").read_text())
    assert len(rows) == 1
    assert rows[0]["mse"] == pytest.approx(64.0)
    assert rows[0]["linf"] == pytest.approx(8.0)
    assert load_manifest(str(out_dir / "adv_clip.u3dt") + ".manifest.json")


def test_inject_zero_volume_is_identity(tmp_path):
    clip_path = _constant_clip_file(tmp_path)
    vol_path = tmp_path / "zero.u3dt"
    save_tensor(np.zeros((4, 8, 8), dtype=np.float32), vol_path)
    out_dir = tmp_path / "adv"
    assert main([
        "inject", "--clips", str(clip_path), "--volume", str(vol_path),
        "--out-dir", str(out_dir), "--no-plots",
    ]) == 0
    adv = load_clip(out_dir / "adv_clip.u3dt")
    assert np.array_equal(adv.data, load_clip(clip_path).data)
    rows = json.loads((out_dir / "inject_metrics.json").read_text())
    assert rows[0]["mse"] == 0.0 and rows[0]["linf"] == 0.0


def test_inject_offsets_one_period_apart_match(tmp_path):
    from conftest import synth_clip

    clip_path = tmp_path / "clip.u3dt"
    save_clip(synth_clip(frames=16, height=8, width=8), clip_path)
    vol_path = tmp_path / "vol.u3dt"
    rng = np.random.default_rng(5)
    save_tensor(rng.uniform(-5, 5, (4, 8, 8)).astype(np.float32), vol_path)

    outs = []
    for offset, name in ((1, "o1"), (5, "o5")):
        out_dir = tmp_path / name
        assert main([
            "inject", "--clips", str(clip_path), "--volume", str(vol_path),
            "--offset", str(offset), "--out-dir", str(out_dir), "--no-plots",
        ]) == 0
        outs.append((out_dir / "adv_clip.u3dt").read_bytes())
    assert outs[0] == outs[1]


def test_inject_accepts_optimizer_params_as_spec(tmp_path, clip_dir_factory):
    # the params file a real optimize run writes (not a hand-built stand-in)
    videos = clip_dir_factory(n=1, height=8, width=8)
    params_path = tmp_path / "params.json"
    assert main([
        "optimize", "--videos", str(videos), "--T", "8", "--epsilon", "4",
        "--samples", "1", "--swarm-size", "2", "--iters", "0", "--no-plots",
        "--out-params", str(params_path), "--out-report", str(tmp_path / "r.json"),
    ]) == 0

    clip_path = _constant_clip_file(tmp_path, frames=8, hw=8)
    out_dir = tmp_path / "adv"
    assert main([
        "inject", "--clips", str(clip_path), "--spec", str(params_path),
        "--out-dir", str(out_dir), "--no-plots",
    ]) == 0
    rows = json.loads((out_dir / "inject_metrics.json").read_text())
    assert 0.0 < rows[0]["linf"] <= 4.0

    out = tmp_path / "eval.json"
    assert main([
        "evaluate", "--videos", str(videos), "--spec", str(params_path),
        "--out", str(out), "--no-plots",
    ]) == 0
    assert len(json.loads(out.read_text())["per_offset"]) == 10


def test_inject_requires_volume_or_spec(tmp_path):
    clip_path = _constant_clip_file(tmp_path)
    assert main([
        "inject", "--clips", str(clip_path),
        "--out-dir", str(tmp_path / "adv"), "--no-plots",
    ]) == 2


# ---------------------------------------------------------------------------
# optimize


def _opt_args(videos, out_params, out_report, extra=()):
    return [
        "optimize", "--videos", str(videos), "--T", "8", "--samples", "2",
        "--out-params", str(out_params), "--out-report", str(out_report),
        *extra,
    ]


def test_optimize_pso_outputs(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=2, height=8, width=8)
    p, r = tmp_path / "params.json", tmp_path / "report.json"
    rc = main(_opt_args(videos, p, r, extra=("--swarm-size", "3", "--iters", "2")))
    assert rc == 0

    params = json.loads(p.read_text())
    assert set(params) == {
        "variant", "best_params", "best_fitness", "trace", "evals", "spec",
    }
    assert params["evals"] == 3 * (2 + 1)
    assert len(params["trace"]) == 3
    assert params["best_fitness"] > 0
    NoiseSpec.from_dict(params["spec"])  # embedded spec is loadable

    report = json.loads(r.read_text())
    assert report["algorithm"] == "pso"
    assert report["seconds"] > 0
    assert (tmp_path / "report.png").exists()

    manifest = load_manifest(str(p) + ".manifest.json")
    assert manifest["command"] == "optimize"
    assert manifest["deterministic_outputs"] == [str(p)]


def test_optimize_no_plots_skips_figure(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=1, height=8, width=8)
    p, r = tmp_path / "p.json", tmp_path / "r.json"
    rc = main(_opt_args(
        videos, p, r, extra=("--swarm-size", "2", "--iters", "0", "--no-plots")
    ))
    assert rc == 0
    assert not (tmp_path / "r.png").exists()
    assert json.loads(p.read_text())["evals"] == 2


def test_optimize_missing_video_dir_is_validation_error(tmp_path):
    assert main(_opt_args(tmp_path / "nowhere", tmp_path / "p", tmp_path / "r")) == 2


@pytest.mark.parametrize(
    "engine,flags,evals",
    [
        ("ga", ("--population", "3", "--iters", "2"), 3 + 2 * 2),
        ("sa", ("--sa-iters", "4"), 1 + 4),
        ("ts", ("--ts-iters", "2"), 1 + 2 * 2 * 5),
    ],
)
def test_optimize_alternate_engines(tmp_path, clip_dir_factory, engine, flags, evals):
    videos = clip_dir_factory(n=1, height=8, width=8)
    p, r = tmp_path / "p.json", tmp_path / "r.json"
    rc = main(_opt_args(
        videos, p, r, extra=("--optimizer", engine, "--no-plots", *flags)
    ))
    assert rc == 0
    params = json.loads(p.read_text())
    assert params["evals"] == evals
    assert json.loads(r.read_text())["algorithm"] == engine


def test_optimize_hybrid_smoke(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=2, height=8, width=8)
    p, r = tmp_path / "p.json", tmp_path / "r.json"
    rc = main(_opt_args(videos, p, r, extra=(
        "--swarm-size", "2", "--iters", "1", "--no-plots",
        "--hybrid", "--omega", "5", "--budget", "50", "--query-set", "2",
    )))
    assert rc == 0
    assert json.loads(p.read_text())["best_fitness"] > 0


def test_optimize_hybrid_query_set_too_large(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=1, height=8, width=8)
    rc = main(_opt_args(videos, tmp_path / "p", tmp_path / "r", extra=(
        "--hybrid", "--query-set", "5",
    )))
    assert rc == 2


def test_optimize_protocol_error_exit_code(tmp_path, clip_dir_factory, echo_cmd):
    videos = clip_dir_factory(n=1, height=8, width=8)
    rc = main(_opt_args(videos, tmp_path / "p", tmp_path / "r", extra=(
        "--swarm-size", "2", "--iters", "0", "--no-plots",
        "--extractor", echo_cmd("badmagic"),
    )))
    assert rc == 3


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_default_offset_sweep(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=3, height=8, width=8)
    spec = NoiseSpec(
        "perlin", PerlinParams(6.0, 6.0, 5.0, 3, 8.0), T=8, epsilon=8.0, seed=2
    )
    spec_path = tmp_path / "spec.json"
    save_spec(spec, spec_path)
    out = tmp_path / "eval.json"

    rc = main([
        "evaluate", "--videos", str(videos), "--spec", str(spec_path),
        "--out", str(out),
    ])
    assert rc == 0

    report = json.loads(out.read_text())
    assert [row["offset"] for row in report["per_offset"]] == list(range(10))
    assert 0.0 <= report["success_rate"] <= 1.0
    assert len(report["per_clip"]) == 3 * 10
    recounted = recount_success_rates(report["per_clip"])
    assert recounted == {
        row["offset"]: row["success_rate"] for row in report["per_offset"]
    }
    assert (tmp_path / "eval.csv").read_text().startswith(
        "clip,offset,clean_label,adv_label,flipped,mse,linf"
    )
    assert (tmp_path / "eval.png").exists()
    assert load_manifest(str(out) + ".manifest.json")["command"] == "evaluate"


def test_evaluate_explicit_offsets(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=2, height=8, width=8)
    vol_path = tmp_path / "vol.u3dt"
    rng = np.random.default_rng(0)
    save_tensor(rng.uniform(-6, 6, (8, 8, 8)).astype(np.float32), vol_path)
    out = tmp_path / "eval.json"
    rc = main([
        "evaluate", "--videos", str(videos), "--volume", str(vol_path),
        "--offsets", "0,4", "--out", str(out), "--no-plots",
    ])
    assert rc == 0
    report = json.loads(out.read_text())
    assert [row["offset"] for row in report["per_offset"]] == [0, 4]
    assert not (tmp_path / "eval.png").exists()


# ---------------------------------------------------------------------------
# stream


def test_stream_clip_source_matches_batch_injection(tmp_path, make_clip):
    clip = make_clip(frames=8, height=16, width=16)
    clip_path = tmp_path / "clip.u3dt"
    save_clip(clip, clip_path)
    rng = np.random.default_rng(7)
    vol = rng.uniform(-5, 5, (4, 16, 16)).astype(np.float32)
    vol_path = tmp_path / "vol.u3dt"
    save_tensor(vol, vol_path)
    out_bin = tmp_path / "frames.bin"
    report_path = tmp_path / "latency.json"

    rc = main([
        "stream", "--source", str(clip_path), "--volume", str(vol_path),
        "--offset", "2", "--out", str(out_bin), "--report", str(report_path),
        "--no-plots",
    ])
    assert rc == 0

    report = json.loads(report_path.read_text())
    assert report["frames"] == 8
    for key in ("mean_seconds", "p95_seconds", "max_seconds", "budget_seconds"):
        assert key in report

    expected = apply_perturbation(clip, vol, 2).data
    with open(out_bin, "rb") as f:
        frames = [read_tensor(f) for _ in range(8)]
    assert np.array_equal(np.stack(frames), expected)
    assert load_manifest(str(report_path) + ".manifest.json")["command"] == "stream"


def test_stream_stdin_to_stdout_subprocess(tmp_path):
    rng = np.random.default_rng(3)
    frames = [
        rng.uniform(0, 255, (16, 16, 3)).astype(np.float32) for _ in range(4)
    ]
    vol = rng.uniform(-4, 4, (2, 16, 16)).astype(np.float32)
    vol_path = tmp_path / "vol.u3dt"
    save_tensor(vol, vol_path)
    report_path = tmp_path / "latency.json"

    proc = subprocess.run(
        [
            sys.executable, "-m", "u3d.cli", "stream", "--source", "-",
            "--volume", str(vol_path), "--out", "-",
            "--report", str(report_path), "--no-plots",
        ],
        input=b"".join(tensor_bytes(f) for f in frames),
        capture_output=True,
        timeout=120,
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr.decode()

    buf = io.BytesIO(proc.stdout)
    got = np.stack([read_tensor(buf) for _ in range(4)])
    expected = apply_perturbation(VideoClip(np.stack(frames)), vol, 0).data
    assert np.array_equal(got, expected)
    assert json.loads(report_path.read_text())["frames"] == 4


def test_stream_rejects_bad_volume_rank(tmp_path):
    clip_path = _constant_clip_file(tmp_path, frames=4, hw=8)
    flat = tmp_path / "flat.u3dt"
    save_tensor(np.zeros((8, 8), dtype=np.float32), flat)
    rc = main([
        "stream", "--source", str(clip_path), "--volume", str(flat),
        "--report", str(tmp_path / "lat.json"), "--no-plots",
    ])
    assert rc == 2


# ---------------------------------------------------------------------------
# bench


def test_bench_tiny_matched_budget(tmp_path, clip_dir_factory):
    videos = clip_dir_factory(n=2, height=8, width=8)
    out = tmp_path / "bench.json"
    rc = main([
        "bench", "--videos", str(videos), "--T", "8", "--samples", "2",
        "--swarm-size", "3", "--iters", "1", "--reps", "1",
        "--out", str(out), "--no-plots",
    ])
    assert rc == 0

    payload = json.loads(out.read_text())
    assert [row["optimizer"] for row in payload["rows"]] == ["pso", "ga", "sa", "ts"]
    evals = {r["optimizer"]: r["evals"] for r in payload["runs"]}
    # budget = 3 * (1 + 1) = 6 evaluations, matched per engine
    assert evals == {"pso": 6, "ga": 3 + 2 * 2, "sa": 6, "ts": 1 + 1 * 2 * 5}

    results = json.loads((tmp_path / "bench.results.json").read_text())
    assert len(results) == 4
    assert all("seconds" not in r for r in results)  # timing kept out
    csv_text = (tmp_path / "bench.csv").read_text()
    assert csv_text.startswith("optimizer,seconds,best_fitness,volume_mse")
    assert len(csv_text.strip().splitlines()) == 5
    assert load_manifest(str(out) + ".manifest.json")["deterministic_outputs"] == [
        str(tmp_path / "bench.results.json")
    ]
