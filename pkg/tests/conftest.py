import re
import shlex
import sys
from pathlib import Path

import numpy as np
import pytest

from u3d import VideoClip, save_clip

HELPER = Path(__file__).parent / "helpers" / "echo_extractor.py"


def helper_cmd(mode: str, *args) -> str:
    parts = [sys.executable, str(HELPER), mode] + [str(a) for a in args]
    return " ".join(shlex.quote(p) for p in parts)


def synth_clip(frames=16, height=12, width=12, channels=3, seed=0) -> VideoClip:
    """A deterministic synthetic clip with some spatial structure plus noise
    (pure iid noise makes distances unrealistically flat)."""
    rng = np.random.default_rng(seed)
    t = np.arange(frames)[:, None, None]
    y = np.arange(height)[None, :, None]
    x = np.arange(width)[None, None, :]
    base = 127.0 + 60.0 * np.sin(2 * np.pi * (x / width + t / frames)) * np.cos(
        2 * np.pi * y / height
    )
    data = base[..., None] + rng.uniform(-25, 25, (frames, height, width, channels))
    return VideoClip(np.clip(data, 0, 255).astype(np.float32))


@pytest.fixture
def make_clip():
    return synth_clip


@pytest.fixture
def clip_dir_factory(tmp_path):
    def _make(n=2, frames=16, height=12, width=12, channels=3, seed0=0, name="clips"):
        d = tmp_path / name
        d.mkdir(exist_ok=True)
        for i in range(n):
            save_clip(synth_clip(frames, height, width, channels, seed0 + i), d / f"clip{i:02d}.u3dt")
        return d

    return _make


@pytest.fixture
def echo_cmd():
    return helper_cmd


# --- acceptance-criteria reporting -----------------------------------------


def _lines(config):
    if not hasattr(config, "_acceptance_lines"):
        config._acceptance_lines = []
    return config._acceptance_lines


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def _report(num, desc, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"criterion {num}: {status} — {desc}"
        if detail:
            line += f" [{detail}]"
        _lines(request.config).append((num, line))
        print(line)
        assert ok, line

    return _report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call":
        return
    m = re.match(r"test_criterion_(\d+)", item.name)
    if m and rep.failed:
        num = int(m.group(1))
        lines = _lines(item.config)
        if not any(n == num for n, _ in lines):
            lines.append((num, f"criterion {num}: FAIL — test errored before check completed"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = _lines(config)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda p: p[0]):
            terminalreporter.write_line(line)
