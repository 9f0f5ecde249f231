"""Report figures rendered next to the delimited output.

Two views of a run: a country-by-protocol prevalence matrix colored by
where censorship was observed (neither / v4-only / v6-only / both), and
per-protocol bar charts of injected fractions with the decision
threshold drawn in.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as mpatches
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap

from .analysis import DifferentialRow, Verdict

_CATEGORY_ORDER = ("neither", "v4-only", "v6-only", "both")
_CATEGORY_COLORS = ("#ececec", "#4878a8", "#e8a33d", "#a83232")


def render_prevalence_matrix(rows: Sequence[DifferentialRow], path: Path | str) -> Path:
    """Country x protocol grid of differential categories."""
    countries = sorted({r.country for r in rows})
    protocols = sorted({r.protocol for r in rows})
    index = {(r.country, r.protocol): _CATEGORY_ORDER.index(r.category) for r in rows}
    grid = np.zeros((len(countries), len(protocols)))
    for i, cc in enumerate(countries):
        for j, proto in enumerate(protocols):
            grid[i, j] = index.get((cc, proto), 0)

    fig, ax = plt.subplots(
        figsize=(1.2 + 0.9 * len(protocols), 1.0 + 0.35 * len(countries))
    )
    cmap = ListedColormap(_CATEGORY_COLORS)
    ax.imshow(grid, cmap=cmap, vmin=0, vmax=3, aspect="auto")
    ax.set_xticks(range(len(protocols)), protocols, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(countries)), countries, fontsize=8)
    ax.set_title("Observed censorship by country and protocol")
    handles = [
        mpatches.Patch(color=c, label=l)
        for c, l in zip(_CATEGORY_COLORS, _CATEGORY_ORDER)
    ]
    ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.02, 1.0), fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_fraction_bars(
    verdicts: Sequence[Verdict], path: Path | str, threshold: float = 0.20
) -> Path:
    """Injected fraction per country, v4 beside v6, one panel per protocol."""
    country_verdicts = [v for v in verdicts if v.scope_type == "country"]
    protocols = sorted({v.protocol for v in country_verdicts})
    countries = sorted({v.scope for v in country_verdicts})
    lookup = {(v.scope, v.protocol, v.ip_version): v.fraction for v in country_verdicts}

    ncols = max(1, len(protocols))
    fig, axes = plt.subplots(
        1, ncols, figsize=(max(4.0, 0.5 * len(countries)) * ncols, 3.6), squeeze=False
    )
    x = np.arange(len(countries))
    for ax, protocol in zip(axes[0], protocols):
        v4 = [lookup.get((cc, protocol, 4), 0.0) for cc in countries]
        v6 = [lookup.get((cc, protocol, 6), 0.0) for cc in countries]
        ax.bar(x - 0.2, v4, width=0.4, label="IPv4", color="#4878a8")
        ax.bar(x + 0.2, v6, width=0.4, label="IPv6", color="#e8a33d")
        ax.axhline(threshold, color="#a83232", linewidth=1, linestyle="--")
        ax.set_xticks(x, countries, rotation=60, ha="right", fontsize=7)
        ax.set_ylim(0, 1.0)
        ax.set_title(protocol, fontsize=9)
    axes[0][0].set_ylabel("injected fraction")
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(
    verdicts: Sequence[Verdict],
    differential: Sequence[DifferentialRow],
    out_dir: Path | str,
    threshold: float = 0.20,
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if differential:
        written.append(render_prevalence_matrix(differential, out_dir / "prevalence.png"))
    if any(v.scope_type == "country" for v in verdicts):
        written.append(
            render_fraction_bars(verdicts, out_dir / "fractions.png", threshold=threshold)
        )
    return written
