"""Attack evaluation reports, delimited output, and rendered figures.

JSON is the source of truth for every report; CSV tables and PNG figures
are rendered from the same data for quick inspection.  Figures use the
Agg backend and only ever write files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tensorio import VideoClip, apply_perturbation, pixel_metrics


@dataclass(frozen=True)
class EvalReport:
    """Success rates of a volume against a labeler, per start offset.

    success_rate is the mean of the per-offset rates; per_clip rows carry
    enough detail (labels per clip and offset) to recount every rate.
    """

    success_rate: float
    per_offset: list  # [{offset, success_rate, flips, clips}]
    per_clip: list  # [{clip, offset, clean_label, adv_label, flipped, mse, linf}]
    pixel: dict  # {mse_mean, linf_max}

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValidationError(f"success rate {self.success_rate} outside [0, 1]")
        for row in self.per_offset:
            if not 0.0 <= row["success_rate"] <= 1.0:
                raise ValidationError(f"per-offset rate outside [0, 1]: {row}")

    def to_dict(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "per_offset": list(self.per_offset),
            "pixel": dict(self.pixel),
            "per_clip": list(self.per_clip),
        }


def evaluate_attack(labeler, clips: list, names: list, volume, offsets: list) -> EvalReport:
    """Label every clip clean and perturbed at each start offset.

    `labeler` needs a label(clip) -> int method; a clip counts as a
    success at an offset when its label changes there.
    """
    if not clips:
        raise ValidationError("need at least one clip to evaluate")
    if len(names) != len(clips):
        raise ValidationError("names and clips must align")
    if not offsets:
        raise ValidationError("need at least one start offset")
    clean = [labeler.label(c) for c in clips]
    per_offset = []
    per_clip = []
    mse_sum = 0.0
    linf_max = 0.0
    for off in offsets:
        flips = 0
        for name, clip, base in zip(names, clips, clean):
            adv = apply_perturbation(clip, volume, int(off))
            label = labeler.label(adv)
            metrics = pixel_metrics(clip, adv)
            flipped = label != base
            flips += int(flipped)
            mse_sum += metrics.mse
            linf_max = max(linf_max, metrics.linf)
            per_clip.append(
                {
                    "clip": str(name),
                    "offset": int(off),
                    "clean_label": int(base),
                    "adv_label": int(label),
                    "flipped": bool(flipped),
                    "mse": metrics.mse,
                    "linf": metrics.linf,
                }
            )
        per_offset.append(
            {
                "offset": int(off),
                "success_rate": flips / len(clips),
                "flips": flips,
                "clips": len(clips),
            }
        )
    overall = float(np.mean([row["success_rate"] for row in per_offset]))
    pixel = {
        "mse_mean": mse_sum / (len(offsets) * len(clips)),
        "linf_max": linf_max,
    }
    return EvalReport(
        success_rate=overall, per_offset=per_offset, per_clip=per_clip, pixel=pixel
    )


def recount_success_rates(per_clip: list) -> dict:
    """Recompute per-offset success rates from raw per-clip rows."""
    flips = {}
    totals = {}
    for row in per_clip:
        off = row["offset"]
        totals[off] = totals.get(off, 0) + 1
        flips[off] = flips.get(off, 0) + int(row["clean_label"] != row["adv_label"])
    return {off: flips[off] / totals[off] for off in totals}


# ---------------------------------------------------------------------------
# Delimited output


def write_csv(path, fieldnames: list, rows: list) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_eval_csv(report: EvalReport, path) -> None:
    write_csv(
        path,
        ["clip", "offset", "clean_label", "adv_label", "flipped", "mse", "linf"],
        report.per_clip,
    )


def write_bench_csv(rows: list, path) -> None:
    write_csv(
        path, ["optimizer", "seconds", "best_fitness", "volume_mse"], rows
    )


# ---------------------------------------------------------------------------
# Figures


def _axes(title, xlabel, ylabel):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path)
    import matplotlib.pyplot as plt

    plt.close(fig)


def plot_traces(traces: dict, path) -> None:
    """Best-so-far fitness per iteration, one line per labelled run."""
    fig, ax = _axes("Optimization progress", "iteration", "best fitness")
    for name, trace in traces.items():
        ax.plot(range(len(trace)), trace, label=str(name))
    if traces:
        ax.legend()
    _save(fig, path)


def plot_offset_sr(report: EvalReport, path) -> None:
    fig, ax = _axes("Success rate by start offset", "start offset", "success rate")
    offs = [row["offset"] for row in report.per_offset]
    rates = [row["success_rate"] for row in report.per_offset]
    ax.bar(offs, rates, width=0.8)
    ax.set_ylim(0.0, 1.05)
    _save(fig, path)


def plot_latency(inject_seconds: np.ndarray, budget: float, path) -> None:
    fig, ax = _axes("Per-frame injection latency", "frame", "milliseconds")
    ax.plot(np.asarray(inject_seconds) * 1e3, lw=0.8)
    ax.axhline(budget * 1e3, color="tab:red", ls="--", label="budget")
    ax.legend()
    _save(fig, path)


def plot_bench(rows: list, path) -> None:
    fig, ax = _axes("Optimizer comparison", "optimizer", "mean best fitness")
    names = [r["optimizer"] for r in rows]
    ax.bar(names, [r["best_fitness"] for r in rows], width=0.6)
    _save(fig, path)
