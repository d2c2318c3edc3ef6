"""Planar SVG overlays: workspace, obstacle outlines, x*, trajectories and potential level sets."""

from __future__ import annotations

import io
import logging
from typing import Optional, Sequence, Tuple

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Circle, Polygon

from ..geometry.world import World
from ..potentials.potential import PotentialKind, PotentialSpec, make_potential

logger = logging.getLogger(__name__)

OUTLINE_POINTS = 256
CONTOUR_GRID = 200
FIGURE_INCHES = 6.0
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")

# fixed salt and no date, so the same inputs give the same bytes
SVG_RC = {"svg.hashsalt": "stochnav", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None}


def potential_grid(world: World, spec: PotentialSpec, size: int = CONTOUR_GRID) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """phi on a size x size grid over the workspace box; values[j, i] sits at (xs[i], ys[j]), NaN off the free space."""
    c, r = world.workspace.center, world.workspace.radius
    xs = np.linspace(c[0] - r, c[0] + r, size)
    ys = np.linspace(c[1] - r, c[1] + r, size)
    potential = make_potential(world, spec)
    values = np.full((size, size), np.nan)
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            p = np.array([x, y])
            if world.in_interior(p):
                values[j, i] = potential.value(p)
    return xs, ys, values


def contour_levels(spec: PotentialSpec, values: np.ndarray, count: int) -> np.ndarray:
    if spec.kind is PotentialKind.RIMON_KODITSCHEK:
        return np.linspace(0.0, 1.0, count + 2)[1:-1]
    finite = values[np.isfinite(values)]
    if not finite.size:
        return np.array([])
    return np.unique(np.quantile(finite, np.linspace(0.0, 1.0, count + 2)[1:-1]))


def render_svg(
    world: World,
    trajectories: Sequence[Tuple[str, np.ndarray]] = (),
    spec: Optional[PotentialSpec] = None,
    levels: int = 0,
    grid: int = CONTOUR_GRID,
) -> str:
    """World overlay; with `spec` and `levels` > 0 the potential's level sets are drawn underneath.

    Element ids: `obstacle-<i>`, `trajectory-<label>`, `xstar`, `contour`.
    """
    if world.dim != 2:
        raise ValueError("SVG plots are planar")
    c, r = world.workspace.center, world.workspace.radius
    fig = Figure(figsize=(FIGURE_INCHES, FIGURE_INCHES))
    ax = fig.add_subplot()
    ax.set_aspect("equal")
    pad = 0.05 * r
    ax.set_xlim(c[0] - r - pad, c[0] + r + pad)
    ax.set_ylim(c[1] - r - pad, c[1] + r + pad)
    ax.set_title(world.name)
    ax.add_patch(Circle(tuple(c), r, fill=False, edgecolor="black", linewidth=1.5, gid="workspace"))

    if spec is not None and levels > 0:
        xs, ys, values = potential_grid(world, spec, grid)
        at = contour_levels(spec, values, levels)
        if at.size:
            contours = ax.contour(xs, ys, np.ma.masked_invalid(values), levels=at, colors="#bbbbbb", linewidths=0.6)
            contours.set_gid("contour")

    for i, ob in enumerate(world.obstacles, start=1):
        ax.add_patch(
            Polygon(ob.boundary_points(OUTLINE_POINTS), closed=True, facecolor="#dddddd", edgecolor="black", gid=f"obstacle-{i}")
        )

    drawn = 0
    for n, (label, pts) in enumerate(trajectories):
        pts = np.asarray(pts, dtype=float)
        if not len(pts):
            continue
        color = PALETTE[n % len(PALETTE)]
        ax.plot(pts[:, 0], pts[:, 1], color=color, linewidth=1.2, label=label, gid=f"trajectory-{label}")
        ax.plot(pts[0, 0], pts[0, 1], marker="o", markersize=4, color=color)
        drawn += 1
    x_star = world.objective.minimizer
    ax.plot(x_star[0], x_star[1], marker="+", markersize=10, markeredgewidth=2, color="black", gid="xstar")
    if drawn:
        ax.legend(loc="upper right", fontsize="small")

    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata=SVG_METADATA)
    logger.debug("rendered %s with %d trajectories", world.name, drawn)
    return buffer.getvalue()
