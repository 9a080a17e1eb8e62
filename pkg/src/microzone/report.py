"""Experiment-grid reporting: delimited output, a markdown digest, and
served-ratio heatmap figures rendered to files."""

from __future__ import annotations

import csv
from pathlib import Path
from statistics import mean
from typing import Sequence

import numpy as np

from microzone.synth import GridRow

CSV_COLUMNS = [
    "n",
    "D",
    "m",
    "seed",
    "num_cliques",
    "exact_ratio",
    "baseline_ratio",
    "clique_time_s",
    "solve_time_s",
]


def write_grid_csv(rows: Sequence[GridRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.n,
                    r.max_diameter,
                    r.num_zones,
                    r.seed,
                    r.num_cliques,
                    f"{r.exact_ratio:.6f}",
                    f"{r.baseline_ratio:.6f}",
                    f"{r.clique_time_s:.3f}",
                    f"{r.solve_time_s:.3f}",
                ]
            )


def read_grid_csv(path: str | Path) -> list[GridRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                GridRow(
                    n=int(rec["n"]),
                    max_diameter=float(rec["D"]),
                    num_zones=int(rec["m"]),
                    seed=int(rec["seed"]),
                    num_cliques=int(rec["num_cliques"]),
                    exact_ratio=float(rec["exact_ratio"]),
                    baseline_ratio=float(rec["baseline_ratio"]),
                    clique_time_s=float(rec["clique_time_s"]),
                    solve_time_s=float(rec["solve_time_s"]),
                )
            )
    return rows


def improvements(rows: Sequence[GridRow]) -> list[float]:
    """Relative improvement of the exact ratio over the baseline per row
    (rows with a zero baseline are skipped)."""
    return [
        (r.exact_ratio - r.baseline_ratio) / r.baseline_ratio
        for r in rows
        if r.baseline_ratio > 0
    ]


def summarize(rows: Sequence[GridRow]) -> dict:
    imps = improvements(rows)
    cells_improved = sum(1 for r in rows if r.exact_ratio > r.baseline_ratio)
    return {
        "rows": len(rows),
        "mean_improvement": mean(imps) if imps else 0.0,
        "max_improvement": max(imps) if imps else 0.0,
        "cells_improved": cells_improved,
        "fraction_improved": cells_improved / len(rows) if rows else 0.0,
        "violations": sum(1 for r in rows if r.exact_ratio < r.baseline_ratio),
    }


def write_summary_md(rows: Sequence[GridRow], path: str | Path) -> None:
    stats = summarize(rows)
    lines = [
        "# Zoning sensitivity grid",
        "",
        f"- rows: {stats['rows']}",
        f"- mean relative improvement (exact vs baseline): "
        f"{100 * stats['mean_improvement']:.2f}%",
        f"- max relative improvement: {100 * stats['max_improvement']:.2f}%",
        f"- cells where exact beats baseline: {stats['cells_improved']}/{stats['rows']} "
        f"({100 * stats['fraction_improved']:.1f}%)",
        f"- cells where baseline beats exact: {stats['violations']}",
        "",
        "| n | D | mean exact ratio | mean baseline ratio | mean cliques |",
        "|---|---|---|---|---|",
    ]
    for n in sorted({r.n for r in rows}):
        for d in sorted({r.max_diameter for r in rows}):
            cell = [r for r in rows if r.n == n and r.max_diameter == d]
            if not cell:
                continue
            lines.append(
                f"| {n} | {d} | {mean(r.exact_ratio for r in cell):.4f} "
                f"| {mean(r.baseline_ratio for r in cell):.4f} "
                f"| {mean(r.num_cliques for r in cell):.0f} |"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def _cell_matrix(rows: Sequence[GridRow], attr: str) -> tuple[np.ndarray, list, list]:
    ns = sorted({r.n for r in rows})
    ds = sorted({r.max_diameter for r in rows})
    mat = np.full((len(ds), len(ns)), np.nan)
    for i, d in enumerate(ds):
        for j, n in enumerate(ns):
            vals = [getattr(r, attr) for r in rows if r.n == n and r.max_diameter == d]
            if vals:
                mat[i, j] = mean(vals)
    return mat, ds, ns


def render_heatmaps(rows: Sequence[GridRow], out_dir: str | Path) -> list[Path]:
    """Render mean served-ratio heatmaps (baseline | exact) and the
    relative-improvement heatmap as PNG files; returns the paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    base, ds, ns = _cell_matrix(rows, "baseline_ratio")
    exact, _, _ = _cell_matrix(rows, "exact_ratio")
    vmax = float(np.nanmax([base, exact])) if rows else 1.0

    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, mat, title in ((axes[0], base, "SimpleZoning"), (axes[1], exact, "exact coverage")):
        im = ax.imshow(mat, origin="lower", cmap="viridis", vmin=0.0, vmax=vmax, aspect="auto")
        ax.set_xticks(range(len(ns)), [str(n) for n in ns])
        ax.set_yticks(range(len(ds)), [str(d) for d in ds])
        ax.set_xlabel("nodes")
        ax.set_title(title)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                if not np.isnan(mat[i, j]):
                    ax.text(j, i, f"{mat[i, j]:.3f}", ha="center", va="center", fontsize=8, color="w")
    axes[0].set_ylabel("max diameter D")
    fig.colorbar(im, ax=axes, fraction=0.03, label="served / total demand")
    ratio_path = out_dir / "served_ratio_heatmap.png"
    fig.savefig(ratio_path, dpi=150, bbox_inches="tight")
    plt.close(fig)

    with np.errstate(divide="ignore", invalid="ignore"):
        imp = np.where(base > 0, (exact - base) / base, np.nan)
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(imp, origin="lower", cmap="magma", aspect="auto")
    ax.set_xticks(range(len(ns)), [str(n) for n in ns])
    ax.set_yticks(range(len(ds)), [str(d) for d in ds])
    ax.set_xlabel("nodes")
    ax.set_ylabel("max diameter D")
    ax.set_title("relative improvement of exact over baseline")
    for i in range(imp.shape[0]):
        for j in range(imp.shape[1]):
            if not np.isnan(imp[i, j]):
                ax.text(j, i, f"{100 * imp[i, j]:.1f}%", ha="center", va="center", fontsize=8, color="w")
    fig.colorbar(im, ax=ax, fraction=0.04, label="(exact - baseline) / baseline")
    imp_path = out_dir / "improvement_heatmap.png"
    fig.savefig(imp_path, dpi=150, bbox_inches="tight")
    plt.close(fig)

    return [ratio_path, imp_path]
