"""Report writers: JSON (the machine-readable contract), CSV, and PNG figures.

JSON is the format other tools parse; the figures are a convenience view of
the same numbers and are never read back. All writers are deterministic:
keys sorted, no timestamps, fixed PNG metadata.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_PNG_METADATA = {"Software": "kswap"}


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_beta_curves_png(curves, path) -> None:
    """Line plot of score versus beta, one line per source-target pair."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for curve in curves:
        ax.plot(curve.betas, curve.scores, marker="o",
                label=f"{curve.pair_id[0]} → {curve.pair_id[1]}")
    ax.set_xlabel("beta")
    ax.set_ylabel("mean surface dice")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_scores_png(per_scan, path, title: str = "") -> None:
    """Bar chart of per-scan surface dice next to volumetric dice."""
    ids = [row["id"] for row in per_scan]
    x = range(len(ids))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.0 + 0.8 * len(ids)), 4.0))
    ax.bar([i - 0.2 for i in x], [row["surface_dice"] for row in per_scan],
           width=0.4, label="surface dice")
    ax.bar([i + 0.2 for i in x], [row["dice"] for row in per_scan],
           width=0.4, label="dice")
    ax.set_xticks(list(x))
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("score")
    if title:
        ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
