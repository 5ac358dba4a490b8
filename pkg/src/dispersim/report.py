"""Delimited output and figure rendering for experiment bundles.

Every report is written as CSV first; figures are rendered next to the CSVs
from the same rows, so the delimited data remains the source of truth.
Writes are atomic (temp file + rename) and carry no timestamps or other
run-varying metadata, keeping bundles byte-reproducible.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def text_table(header: list[str], rows: list[tuple]) -> str:
    """Fixed-width table for terminal output."""
    cells = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in header]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(row: list[str]) -> str:
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
    lines = [fmt(list(header)), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in cells)
    return "\n".join(lines)


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp.png")
    # Strip the Software tag so the PNG bytes do not vary between runs.
    fig.savefig(tmp, dpi=130, metadata={"Software": None})
    plt.close(fig)
    os.replace(tmp, path)


def makespan_figure(
    per_seq: dict[str, dict[int, float]],
    path: Path,
    title: str = "Mean makespan per input file",
) -> None:
    """One line per mapper: mean makespan against the input sequence number."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for mapper in sorted(per_seq):
        series = per_seq[mapper]
        seqs = sorted(series)
        ax.plot(seqs, [series[s] for s in seqs], marker="o", markersize=3.5, label=mapper)
    ax.set_xlabel("input file sequence number")
    ax.set_ylabel("makespan (s)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def summary_figure(
    stats: list[tuple[str, float, float]],
    path: Path,
    ylabel: str = "makespan (s)",
    title: str = "Mean makespan by mapper",
) -> None:
    """Bar chart of mean +/- std per mapper."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    names = [name for name, _, _ in stats]
    means = [mean for _, mean, _ in stats]
    stds = [std for _, _, std in stats]
    ax.bar(range(len(names)), means, yerr=stds, capsize=4, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def sweep_figure(
    series: dict[str, list[tuple[int, float]]],
    path: Path,
    title: str = "Mapping runtime vs cluster size",
) -> None:
    """One line per mapper: mean mapping runtime against node count."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for mapper in sorted(series):
        points = sorted(series[mapper])
        ax.plot(
            [n for n, _ in points],
            [v for _, v in points],
            marker="s",
            markersize=4,
            label=mapper,
        )
    ax.set_xlabel("number of nodes")
    ax.set_ylabel("mapping runtime (s)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
