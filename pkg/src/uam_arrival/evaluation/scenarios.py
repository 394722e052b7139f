"""Scripted wave scenario, randomized simulation study and Poisson-cluster arrivals."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..environment import (generate_poisson_schedule, generate_stream_schedule,
                           generate_wave_schedule)
from ..geometry import AirspaceConfig
from ..neural import Network
from .metrics import AGG_FIELDS, RunMetrics, aggregate
from .noise import NoiseModel
from .runner import ActorPolicy, Policy, RunResult, run_schedule


def run_wave_scenario(policy: Policy, *, n_waves: int = 3, gap: float = 30.0, speed: float = 13.0,
                      config: Optional[AirspaceConfig] = None, max_time: float = 3600.0,
                      entrance_check: bool = False) -> RunResult:
    """Four vehicles (one per gate) every `gap` seconds, `n_waves` times, no heading noise."""
    schedule = generate_wave_schedule(n_waves, gap, speed)
    return run_schedule(policy, schedule, config=config, entrance_check=entrance_check,
                        max_time=max_time)


def run_poisson_scenario(policy: Policy, seed: int = 0, *, n_clusters: int = 4,
                         cluster_gap: float = 120.0, lam: float = 5.0, intra_gap: float = 10.0,
                         entrance_check: bool = False, noise_sigma: float = 0.0,
                         config: Optional[AirspaceConfig] = None,
                         max_time: float = 3600.0) -> tuple:
    """Clustered arrivals through the south gate. Returns (schedule, result)."""
    sched_ss, noise_ss = np.random.SeedSequence([seed, 4242]).spawn(2)
    schedule = generate_poisson_schedule(np.random.default_rng(sched_ss), n_clusters, cluster_gap,
                                         lam, intra_gap)
    result = run_schedule(policy, schedule, config=config, entrance_check=entrance_check,
                          noise=NoiseModel(noise_sigma), noise_rng=np.random.default_rng(noise_ss),
                          max_time=max_time)
    return schedule, result


def run_seeds(seed: int, n: int, rep: int) -> tuple:
    """Independent (schedule, noise) generators for one study cell."""
    sched_ss, noise_ss = np.random.SeedSequence([seed, n, rep]).spawn(2)
    return np.random.default_rng(sched_ss), np.random.default_rng(noise_ss)


@dataclass
class StudyCell:
    n: int
    rep: int
    metrics: RunMetrics
    positions: list = field(default_factory=list)


@dataclass
class StudyResult:
    n_set: list
    reps: int
    entrance_check: bool
    noise_sigma: float
    seed: int
    cells: list

    def runs_for(self, n: int) -> list:
        return [c.metrics for c in self.cells if c.n == n]

    def rows(self) -> list:
        return [{"N": n, **aggregate(self.runs_for(n))} for n in self.n_set]

    def positions_for(self, n: int) -> np.ndarray:
        pts = [p for c in self.cells if c.n == n for p in c.positions]
        return np.asarray(pts, dtype=float).reshape(-1, 2)

    def to_json(self) -> str:
        doc = {
            "study": {"n_set": self.n_set, "reps": self.reps, "entrance_check": self.entrance_check,
                      "noise_sigma": self.noise_sigma, "seed": self.seed},
            "rows": self.rows(),
            "runs": [{"N": c.n, "rep": c.rep, **c.metrics.summary()} for c in self.cells],
        }
        return json.dumps(doc, indent=2, allow_nan=True)

    def to_text(self) -> str:
        return format_table(self.rows())


def format_table(rows: Sequence[dict]) -> str:
    cols = ["N", "runs", "accidents_total", "incidents_total", "false_entrances_total"]
    cols += [f"{m}_mean" for m in ("time_to_signal", "entrance_time", "airspace_time")]
    cols += [f"{m}_std" for m in ("time_to_signal", "entrance_time", "airspace_time")]
    cols += ["timed_out"]

    def fmt(v):
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.2f}"
        return str(v)

    cells = [[fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[k]) for row in cells)) if cells else len(c)
              for k, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _study_cell(args) -> StudyCell:
    params, n, rep, seed, entrance_check, noise_sigma, gap, max_time, position_every = args
    policy = ActorPolicy(Network("actor", params))
    sched_rng, noise_rng = run_seeds(seed, n, rep)
    schedule = generate_stream_schedule(n, sched_rng, gap=gap)
    res = run_schedule(policy, schedule, entrance_check=entrance_check,
                       noise=NoiseModel(noise_sigma), noise_rng=noise_rng, max_time=max_time,
                       record_trajectory=False, position_every=position_every)
    return StudyCell(n, rep, res.metrics, res.positions)


def run_simulation_study(actor: Network, n_set: Sequence[int], reps: int, *,
                         entrance_check: bool = False, noise_sigma: float = 0.0, seed: int = 0,
                         gap: float = 15.0, max_time: float = 3600.0, workers: int = 1,
                         position_every: Optional[float] = 5.0) -> StudyResult:
    """`reps` randomized stream runs for every N in `n_set`.

    Each (N, rep) cell draws its schedule and noise from its own seed, so
    results do not depend on execution order or the number of workers.
    """
    if reps < 1 or not n_set:
        raise ValueError("need at least one N and one repetition")
    jobs = [(actor.params, int(n), rep, seed, entrance_check, float(noise_sigma), gap, max_time,
             position_every) for n in n_set for rep in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_study_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        cells = [_study_cell(j) for j in jobs]
    return StudyResult([int(n) for n in n_set], reps, entrance_check, float(noise_sigma), seed, cells)


__all__ = ["run_wave_scenario", "run_poisson_scenario", "run_simulation_study", "run_seeds",
           "StudyResult", "StudyCell", "format_table", "AGG_FIELDS"]
