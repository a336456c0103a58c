"""SVG heatmaps of aggregated archives and (mu+1) population maps."""

from __future__ import annotations

import io
from enum import Enum
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.cm import ScalarMappable
from matplotlib.colors import Normalize
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from ttpqd.archive.map_grid import GridSpec, cell_index
from ttpqd.harness.tables import AggregateMap

CMAP_NAME = "YlOrRd"
EMPTY_COLOR = "#e6e6e6"
SVG_HASH_SALT = "ttpqd"


class HeatmapMode(str, Enum):
    QUALITY = "quality"
    FREQUENCY = "frequency"


def _label_axes(ax, spec: GridSpec) -> None:
    ax.set_xlim(0, spec.delta1)
    ax.set_ylim(0, spec.delta2)
    ax.set_aspect("equal")
    ax.set_xticks([0, spec.delta1], labels=[f"{spec.f_star:.1f}", f"{spec.f_max:.1f}"])
    ax.set_yticks([0, spec.delta2], labels=[f"{spec.g_min:.1f}", f"{spec.g_star:.1f}"])
    ax.set_xlabel("tour length f")
    ax.set_ylabel("packing profit g")


def _to_svg(fig: Figure, description: str, path: Path | None) -> str:
    buffer = io.StringIO()
    with mpl.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None, "Description": description})
    document = buffer.getvalue()
    if path is not None:
        Path(path).write_text(document, encoding="utf-8")
    return document


def render_heatmap(agg: AggregateMap, mode: HeatmapMode | str, path: Path | None = None) -> str:
    """Draw the delta1 x delta2 grid, one rectangle per cell.

    QUALITY colours occupied cells by mean z, min-max normalized over the occupied cells;
    FREQUENCY colours them by occupancy / runs on a fixed [0, 1] scale. Empty cells stay
    neutral. Every rectangle carries the gid ``cell_<i>_<j>``.

    Returns:
        str: The standalone SVG document (also written to ``path`` when given).
    """
    mode = HeatmapMode(mode)
    spec = agg.spec
    occupied = agg.occupancy > 0
    if mode is HeatmapMode.QUALITY:
        values = agg.mean_z
        if occupied.any():
            lo, hi = float(np.nanmin(values[occupied])), float(np.nanmax(values[occupied]))
        else:
            lo, hi = 0.0, 1.0
        if hi <= lo:
            hi = lo + 1.0
        norm = Normalize(vmin=lo, vmax=hi)
        label = "mean z"
        description = f"colormap={CMAP_NAME}; min-max normalization of mean z over [{lo!r}, {hi!r}]"
    else:
        values = agg.frequency()
        norm = Normalize(vmin=0.0, vmax=1.0)
        label = f"occupancy / {agg.runs} runs"
        description = f"colormap={CMAP_NAME}; occupancy fraction over {agg.runs} runs on [0, 1]"
    cmap = mpl.colormaps[CMAP_NAME]

    fig = Figure(figsize=(6, 5.5))
    ax = fig.add_subplot()
    for i in range(1, spec.delta1 + 1):
        for j in range(1, spec.delta2 + 1):
            color = cmap(norm(values[i - 1, j - 1])) if occupied[i - 1, j - 1] else EMPTY_COLOR
            ax.add_patch(
                Rectangle(
                    (i - 1, j - 1), 1, 1, facecolor=color, edgecolor="white", linewidth=0.5, gid=f"cell_{i}_{j}"
                )
            )
    _label_axes(ax, spec)
    mappable = ScalarMappable(norm=norm, cmap=cmap)
    fig.colorbar(mappable, ax=ax, label=label)
    ax.set_title(f"{mode.value} map")
    return _to_svg(fig, description, path)


def _binned(spec: GridSpec, points: list[tuple[float, float, float]]) -> np.ndarray:
    counts = np.zeros((spec.delta1, spec.delta2))
    for f, g, _ in points:
        cell = cell_index(spec, f, g)
        if cell is not None:
            counts[cell[0] - 1, cell[1] - 1] += 1
    return counts


def render_population_map(result, path: Path | None = None) -> str:
    """Initial, all generated and final individuals of a run binned into its grid.

    Args:
        result (RunResult): A finished run; typically a (mu+1) run, whose population
            collapses while an archive keeps its spread.

    Returns:
        str: The SVG document.
    """
    spec = result.spec
    panels = {
        "initial": [(s.f, s.g, s.z) for s in result.initial],
        "all": [(s.f, s.g, s.z) for s in result.initial] + list(result.offspring),
        "final": [(s.f, s.g, s.z) for s in result.final_solutions()],
    }
    cmap = mpl.colormaps[CMAP_NAME].copy()
    cmap.set_bad(EMPTY_COLOR)

    fig = Figure(figsize=(15, 5))
    axes = fig.subplots(1, len(panels))
    for ax, (title, points) in zip(axes, panels.items()):
        counts = _binned(spec, points)
        masked = np.ma.masked_where(counts == 0, counts)
        image = ax.imshow(
            masked.T,
            origin="lower",
            cmap=cmap,
            interpolation="nearest",
            vmin=0,
            vmax=max(1.0, float(counts.max())),
            extent=(0, spec.delta1, 0, spec.delta2),
        )
        _label_axes(ax, spec)
        ax.set_title(f"{title} ({len(points)} individuals)")
        fig.colorbar(image, ax=ax, label="individuals per cell")
    return _to_svg(fig, f"colormap={CMAP_NAME}; counts per cell for {result.algorithm.value}", path)
