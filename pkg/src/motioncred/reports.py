"""Report bundle emission: CSV tables and vector-graphics figures.

All numbers are serialized with 4 decimal places and every iteration order
is sorted, so rerunning a command rewrites each file byte-identically.
SVG output pins the hash salt and drops the creation date for the same
reason.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .activities import ACTIVITIES, HAND, HAND_EATING, NON_HAND, mask_to_str
from .authentication import EerReport
from .gate import GateStats
from .identification import ADVERSARIAL, BENIGN, HISTOGRAM_BINS, AccuracyTable, ProbabilityStats

plt.rcParams["svg.hashsalt"] = "motioncred"

_CATEGORY_FILE_TAG = {NON_HAND: "nonhand", HAND: "hand", HAND_EATING: "eating"}


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _save_fig(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_accuracy_table(accuracy: AccuracyTable, path: Path) -> None:
    masks = accuracy.masks()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["activity"] + [mask_to_str(m) for m in masks])
        for activity in accuracy.activities():
            row = [activity]
            for mask in masks:
                value = accuracy.cells.get((activity, mask))
                row.append(_fmt(value) if value is not None else "")
            writer.writerow(row)
        avg = accuracy.average_row()
        writer.writerow(["Avg"] + [_fmt(avg[m]) for m in masks])


def write_probability_stats(
    id_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats],
    auth_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats],
    path: Path,
) -> None:
    header = ["model", "activity", "sensor_mask", "condition", "n_samples", "mean", "std"]
    header += [f"bin_{i}" for i in range(HISTOGRAM_BINS)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for name, stats in (("identification", id_stats), ("authentication", auth_stats)):
            for (activity, mask, condition) in sorted(stats):
                s = stats[(activity, mask, condition)]
                writer.writerow(
                    [name, activity, mask_to_str(mask), condition, s.n_samples,
                     _fmt(s.mean), _fmt(s.std)]
                    + [int(v) for v in s.histogram]
                )


def write_eer_report(report: EerReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["activity", "condition", "mean_eer", "std_eer", "n_subjects"])
        for activity, condition, mean, std, n in report.activity_summary():
            writer.writerow([activity, condition, _fmt(mean), _fmt(std), n])


def write_gate_stats(gate: dict[tuple[str, tuple[str, ...]], GateStats], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["activity", "sensor_mask", "total_samples", "misclassified",
             "misclassified_above_threshold", "pass_rate"]
        )
        masks = sorted({m for _, m in gate}, key=lambda m: (len(m), m))
        for mask in masks:
            total = miscls = passed = 0
            for (activity, m) in sorted(gate):
                if m != mask:
                    continue
                g = gate[(activity, m)]
                writer.writerow(
                    [activity, mask_to_str(mask), g.total_samples, g.misclassified,
                     g.misclassified_above_threshold, _fmt(g.pass_rate)]
                )
                total += g.total_samples
                miscls += g.misclassified
                passed += g.misclassified_above_threshold
            writer.writerow(
                ["ALL", mask_to_str(mask), total, miscls, passed,
                 _fmt(passed / total if total else 0.0)]
            )


# -- figures -------------------------------------------------------------------


def _centers() -> np.ndarray:
    edges = np.linspace(0.0, 1.0, HISTOGRAM_BINS + 1)
    return (edges[:-1] + edges[1:]) / 2


def plot_probability_histograms(
    stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats],
    mask: tuple[str, ...],
    category: str,
    path: Path,
) -> bool:
    """Benign vs adversarial top-1 probability densities, one panel per
    activity of the category present in the stats."""
    acts = sorted(
        {a for (a, m, _) in stats if m == mask and ACTIVITIES[a].category == category}
    )
    acts = [a for a in acts if (a, mask, ADVERSARIAL) in stats and (a, mask, BENIGN) in stats]
    if not acts:
        return False
    fig, axes = plt.subplots(1, len(acts), figsize=(4.2 * len(acts), 3.4), squeeze=False)
    for ax, activity in zip(axes[0], acts):
        for condition, color in ((BENIGN, "tab:blue"), (ADVERSARIAL, "tab:red")):
            s = stats[(activity, mask, condition)]
            density = s.histogram / max(s.n_samples, 1)
            ax.bar(
                _centers(), density, width=1.0 / HISTOGRAM_BINS * 0.9,
                alpha=0.55, color=color,
                label=f"{condition} (mean {s.mean:.2f})",
            )
        ax.set_title(f"{ACTIVITIES[activity].name} ({activity})")
        ax.set_xlabel("top-1 probability")
        ax.set_ylabel("fraction of samples")
        ax.legend(fontsize=8)
    fig.suptitle(f"Identification confidence, {category} activities, {mask_to_str(mask)}")
    fig.tight_layout()
    _save_fig(fig, path)
    return True


def plot_misclassification(
    misclassification: dict[tuple[str, tuple[str, ...], str], float],
    mask: tuple[str, ...],
    path: Path,
) -> bool:
    acts = sorted(
        {a for (a, m, c) in misclassification if m == mask and c == ADVERSARIAL}
    )
    acts = [a for a in acts if (a, mask, BENIGN) in misclassification]
    if not acts:
        return False
    benign = [misclassification[(a, mask, BENIGN)] for a in acts]
    adv = [misclassification[(a, mask, ADVERSARIAL)] for a in acts]
    x = np.arange(len(acts))
    fig, ax1 = plt.subplots(figsize=(1.2 * len(acts) + 3, 3.6))
    ax2 = ax1.twinx()
    ax1.bar(x - 0.2, benign, width=0.38, color="tab:blue", label="benign")
    ax2.bar(x + 0.2, adv, width=0.38, color="tab:red", label="adversarial")
    ax1.set_ylim(0, max(0.08, max(benign) * 1.3 + 1e-3))
    ax2.set_ylim(0, 1.0)
    ax1.set_xticks(x, acts)
    ax1.set_xlabel("activity")
    ax1.set_ylabel("benign misclassification error")
    ax2.set_ylabel("adversarial misclassification error")
    fig.legend(loc="upper left", fontsize=8)
    ax1.set_title(f"Misclassification under attack, {mask_to_str(mask)}")
    fig.tight_layout()
    _save_fig(fig, path)
    return True


def plot_auth_probabilities(
    auth_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats],
    mask: tuple[str, ...],
    path: Path,
) -> bool:
    acts = sorted({a for (a, m, c) in auth_stats if m == mask and c == ADVERSARIAL})
    acts = [a for a in acts if (a, mask, BENIGN) in auth_stats]
    if not acts:
        return False
    benign = [auth_stats[(a, mask, BENIGN)].mean for a in acts]
    adv = [auth_stats[(a, mask, ADVERSARIAL)].mean for a in acts]
    x = np.arange(len(acts))
    fig, ax = plt.subplots(figsize=(1.2 * len(acts) + 3, 3.6))
    ax.bar(x - 0.2, benign, width=0.38, color="tab:blue", label="benign")
    ax.bar(x + 0.2, adv, width=0.38, color="tab:red", label="adversarial")
    ax.axhline(0.5, color="gray", linestyle=":", linewidth=1, label="binary floor (0.5)")
    ax.set_ylim(0, 1.0)
    ax.set_xticks(x, acts)
    ax.set_xlabel("activity")
    ax.set_ylabel("mean predicted-class probability")
    ax.set_title(f"Authentication confidence, {mask_to_str(mask)}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_fig(fig, path)
    return True


def plot_eer(report: EerReport, mask: tuple[str, ...], path: Path) -> bool:
    rows = report.activity_summary()
    acts = sorted({a for a, c, *_ in rows if c == ADVERSARIAL})
    acts = [a for a in acts if any(r[0] == a and r[1] == BENIGN for r in rows)]
    if not acts:
        return False
    by = {(a, c): m for a, c, m, _, _ in rows}
    benign = [by[(a, BENIGN)] for a in acts]
    adv = [by[(a, ADVERSARIAL)] for a in acts]
    x = np.arange(len(acts))
    fig, ax = plt.subplots(figsize=(1.2 * len(acts) + 3, 3.6))
    ax.plot(x, benign, "o-", color="tab:blue", label="benign")
    ax.plot(x, adv, "s-", color="tab:red", label="adversarial")
    ax.set_xticks(x, acts)
    ax.set_xlabel("activity")
    ax.set_ylabel("mean EER")
    ax.set_title(f"Authentication EER, {mask_to_str(mask)}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_fig(fig, path)
    return True


def write_report_bundle(bundle, cfg) -> list[Path]:
    """Emit every CSV and figure for an EvaluationBundle; returns paths."""
    out = cfg.reports_dir()
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    path = out / "accuracy_table.csv"
    write_accuracy_table(bundle.accuracy, path)
    written.append(path)

    path = out / "probability_stats.csv"
    write_probability_stats(bundle.id_stats, bundle.auth_stats, path)
    written.append(path)

    for i, mask in enumerate(cfg.sensor_masks):
        report = bundle.eer_reports.get(mask)
        if report is None:
            continue
        name = "eer_report.csv" if i == 0 else f"eer_report_{mask_to_str(mask)}.csv"
        path = out / name
        write_eer_report(report, path)
        written.append(path)

    path = out / "gate_stats.csv"
    write_gate_stats(bundle.gate, path)
    written.append(path)

    for mask in cfg.sensor_masks:
        mask_str = mask_to_str(mask)
        for category, tag in _CATEGORY_FILE_TAG.items():
            path = out / f"id_probability_{tag}_{mask_str}.svg"
            if plot_probability_histograms(bundle.id_stats, mask, category, path):
                written.append(path)
        path = out / f"misclassification_error_{mask_str}.svg"
        if plot_misclassification(bundle.misclassification, mask, path):
            written.append(path)
        path = out / f"auth_probability_{mask_str}.svg"
        if plot_auth_probabilities(bundle.auth_stats, mask, path):
            written.append(path)
        report = bundle.eer_reports.get(mask)
        if report is not None:
            path = out / f"auth_eer_{mask_str}.svg"
            if plot_eer(report, mask, path):
                written.append(path)

    return written
