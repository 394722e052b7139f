"""Trajectory CSV files and SVG plots of recorded runs."""
from __future__ import annotations

import csv
from typing import Iterable, Optional

from ..geometry import AirspaceConfig
from .runner import TRAJECTORY_COLUMNS

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
            "#7f7f7f", "#bcbd22", "#17becf")


def write_trajectory_csv(path, rows: Iterable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for t, vid, n, e, hdg, spd, sig in rows:
            w.writerow([repr(float(t)), int(vid), repr(float(n)), repr(float(e)), repr(float(hdg)),
                        repr(float(spd)), int(sig)])


def read_trajectory_csv(path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r, ()))
        if header != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(TRAJECTORY_COLUMNS)}")
        rows = []
        for k, rec in enumerate(r, start=2):
            if not rec:
                continue
            try:
                t, vid, n, e, hdg, spd, sig = rec
                rows.append((float(t), int(vid), float(n), float(e), float(hdg), float(spd), int(sig)))
            except ValueError as exc:
                raise ValueError(f"{path}:{k}: malformed row ({exc})") from exc
    return rows


def _frame(cfg: AirspaceConfig, extent: float) -> list:
    # SVG y grows downward and x to the right: x = east, y = -north
    s = extent
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{-s} {-s} {2 * s} {2 * s}" '
           f'width="800" height="800">',
           f'<rect x="{-s}" y="{-s}" width="{2 * s}" height="{2 * s}" fill="white"/>']
    for r, dash in ((cfg.boundary_penalty_radius, "8 8"), (cfg.outer_radius, "none"),
                    (cfg.vtol_radius, "none")):
        out.append(f'<circle cx="0" cy="0" r="{r}" fill="none" stroke="#999" stroke-width="2" '
                   f'stroke-dasharray="{dash}"/>')
    return out


def _triangle(n: float, e: float, heading: float, size: float, color: str) -> str:
    import math
    pts = []
    for da, r in ((0.0, size), (2.5, size * 0.7), (-2.5, size * 0.7)):
        a = heading + da
        pts.append(f"{e + r * math.sin(a):.2f},{-(n + r * math.cos(a)):.2f}")
    return f'<polygon points="{" ".join(pts)}" fill="{color}"/>'


def render_trajectories_svg(rows: list, *, marker_interval: float = 20.0,
                            config: Optional[AirspaceConfig] = None, extent: float = 1200.0,
                            until: Optional[float] = None) -> str:
    """Paths per vehicle with heading triangles every `marker_interval` seconds."""
    cfg = config or AirspaceConfig()
    out = _frame(cfg, extent)
    by_id: dict = {}
    for row in rows:
        if until is None or row[0] <= until + 1e-9:
            by_id.setdefault(row[1], []).append(row)
    for vid in sorted(by_id):
        color = _PALETTE[vid % len(_PALETTE)]
        tr = sorted(by_id[vid])
        pts = " ".join(f"{r[3]:.2f},{-r[2]:.2f}" for r in tr)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="3"/>')
        for r in tr:
            k = round(r[0] / marker_interval)
            if abs(r[0] - k * marker_interval) < 1e-6:
                out.append(_triangle(r[2], r[3], r[4], 25.0, color))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_frames(rows: list, outdir, *, every: float = 1.0, config=None, extent: float = 1200.0) -> list:
    """One SVG per sampled time step showing paths up to that time."""
    from pathlib import Path
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    times = sorted({r[0] for r in rows})
    paths = []
    for t in times:
        k = round(t / every)
        if abs(t - k * every) > 1e-6:
            continue
        p = outdir / f"frame_{int(round(t)):05d}.svg"
        p.write_text(render_trajectories_svg(rows, marker_interval=every * 1e9, config=config,
                                             extent=extent, until=t))
        paths.append(p)
    return paths
