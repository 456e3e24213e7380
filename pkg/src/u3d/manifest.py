"""Run manifests: everything needed to reproduce a command invocation.

A manifest records the subcommand, the verbatim argument vector, the
fully resolved configuration (including every seed), input and output
paths, tool version, and wall-clock timing.  Replaying `argv` at the same
tool version reproduces the run; outputs listed under
`deterministic_outputs` are byte-identical across replays and thread
counts, while `outputs` may additionally carry timing-dependent fields.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone

from .errors import ValidationError

TOOL_NAME = "u3d"
TOOL_VERSION = "0.1.0"


def build_manifest(
    command: str,
    argv: list,
    config: dict,
    inputs: list,
    outputs: list,
    deterministic_outputs: list,
    seeds: dict,
    seconds: float,
) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": command,
        "argv": [str(a) for a in argv],
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "deterministic_outputs": [str(p) for p in deterministic_outputs],
        "seconds": seconds,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def load_manifest(path) -> dict:
    with open(path) as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"manifest is not valid JSON: {exc}") from exc
    for key in ("tool", "version", "command", "argv"):
        if key not in manifest:
            raise ValidationError(f"manifest missing required key {key!r}")
    if manifest["tool"] != TOOL_NAME:
        raise ValidationError(f"manifest from unknown tool {manifest['tool']!r}")
    return manifest


def replay_argv(manifest: dict, threads: int | None = None) -> list:
    """The argument vector that reproduces the run, optionally overriding
    the thread count (which never affects deterministic outputs)."""
    argv = list(manifest["argv"])
    if threads is not None:
        if "--threads" in argv:
            i = argv.index("--threads")
            argv[i + 1] = str(threads)
        else:
            argv += ["--threads", str(threads)]
    return argv
