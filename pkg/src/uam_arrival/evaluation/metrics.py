from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np


@dataclass
class RunMetrics:
    accidents: int = 0
    incidents: int = 0
    false_entrances: int = 0
    airspace_time: float = float("nan")
    time_to_signal: float = float("nan")
    entrance_time: float = float("nan")
    n_vehicles: int = 0
    n_landed: int = 0
    timed_out: bool = False
    # id -> list of (time, distance to closest other vehicle)
    min_pairwise_distance_series: dict = field(default_factory=dict)
    # id -> (spawn, signal, landing) for landed vehicles
    per_vehicle: dict = field(default_factory=dict)

    def min_distances(self) -> dict:
        """Lowest separation each vehicle experienced (inf when it was always alone)."""
        return {vid: min((d for _, d in s), default=math.inf)
                for vid, s in self.min_pairwise_distance_series.items()}

    def summary(self) -> dict:
        return {
            "accidents": self.accidents, "incidents": self.incidents,
            "false_entrances": self.false_entrances, "airspace_time": self.airspace_time,
            "time_to_signal": self.time_to_signal, "entrance_time": self.entrance_time,
            "n_vehicles": self.n_vehicles, "n_landed": self.n_landed, "timed_out": self.timed_out,
        }


def _mean(values: list) -> float:
    return math.fsum(values) / len(values) if values else float("nan")


def compute_run_metrics(records: Mapping, accidents: int = 0, incidents: int = 0,
                        false_entrances: int = 0, nearest_series: Optional[Mapping] = None,
                        timed_out: bool = False) -> RunMetrics:
    """Per-run safety counts and mean timing over landed vehicles.

    `records` maps vehicle id to an object with spawn_time, signal_time and
    landing_time. In a run that finished (not timed out) every vehicle must
    have landed.
    """
    per_vehicle = {}
    for vid, rec in records.items():
        if rec.landing_time is None:
            if not timed_out:
                raise ValueError(f"vehicle {vid} never landed in a completed run")
            continue
        if rec.signal_time is None:
            raise ValueError(f"vehicle {vid} landed without an entry signal")
        per_vehicle[vid] = (rec.spawn_time, rec.signal_time, rec.landing_time)
    tts = [s - sp for sp, s, _ in per_vehicle.values()]
    ent = [la - s for _, s, la in per_vehicle.values()]
    air = [la - sp for sp, _, la in per_vehicle.values()]
    return RunMetrics(
        accidents=accidents, incidents=incidents, false_entrances=false_entrances,
        airspace_time=_mean(air), time_to_signal=_mean(tts), entrance_time=_mean(ent),
        n_vehicles=len(records), n_landed=len(per_vehicle), timed_out=timed_out,
        min_pairwise_distance_series={k: list(v) for k, v in (nearest_series or {}).items()},
        per_vehicle=per_vehicle,
    )


AGG_FIELDS = ("accidents", "incidents", "false_entrances", "airspace_time", "time_to_signal",
              "entrance_time")


def aggregate(runs: Iterable[RunMetrics]) -> dict:
    """Mean, standard deviation and total of each metric over runs (order independent)."""
    runs = list(runs)
    out: dict = {"runs": len(runs), "timed_out": sum(r.timed_out for r in runs)}
    for name in AGG_FIELDS:
        vals = [float(getattr(r, name)) for r in runs]
        vals = [v for v in vals if not math.isnan(v)]
        mean = _mean(vals)
        if len(vals) > 1:
            var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0 if vals else float("nan")
        out[f"{name}_mean"] = mean
        out[f"{name}_std"] = std
        if name in ("accidents", "incidents", "false_entrances"):
            out[f"{name}_total"] = int(math.fsum(vals))
            out[f"{name}_runs_with"] = sum(v > 0 for v in vals)
    return out


def spearman_rho(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    from scipy.stats import spearmanr
    return float(spearmanr(np.asarray(x), np.asarray(y)).statistic)
