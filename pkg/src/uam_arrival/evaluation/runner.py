"""Closed-loop simulation of a policy in the priority-signalled airspace."""
from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from ..environment import AirspaceWorld, step_environment
from ..geometry import ORIGIN, AirspaceConfig
from ..neural import Network, collate
from ..observation import ObservationScales, build_all_observations
from .metrics import RunMetrics, compute_run_metrics
from .noise import NoiseModel, perception

TRAJECTORY_COLUMNS = ("time_s", "vehicle_id", "n_m", "e_m", "heading_rad", "speed_mps", "sigma")


class Policy(Protocol):
    history: int

    def act(self, histories: Sequence, ids: Sequence[int], time: float) -> np.ndarray: ...


class ActorPolicy:
    """Deterministic actions from a trained actor (no exploration noise)."""

    def __init__(self, actor: Network):
        self.actor = actor
        self.history = actor.history

    def act(self, histories, ids, time):
        actions, _ = self.actor.forward(collate(histories))
        return actions


class ScriptedPolicy:
    """Actions from a function of (vehicle id, time); ignores observations."""

    def __init__(self, fn: Callable[[int, float], float], history: int = 3):
        self.fn = fn
        self.history = history

    def act(self, histories, ids, time):
        return np.array([self.fn(i, time) for i in ids], dtype=float)


@dataclass
class RunResult:
    metrics: RunMetrics
    trajectory: list = field(default_factory=list)       # rows in TRAJECTORY_COLUMNS order
    positions: list = field(default_factory=list)        # sampled (n, e) for density estimates
    end_time: float = 0.0

    def markers(self, interval: float) -> list:
        """Trajectory rows whose time is a multiple of `interval`."""
        return [r for r in self.trajectory if _is_multiple(r[0], interval)]


def _is_multiple(t: float, interval: float) -> bool:
    k = round(t / interval)
    return abs(t - k * interval) < 1e-6


def simulate(world: AirspaceWorld, policy: Policy, *, max_time: float = 3600.0,
             scales: Optional[ObservationScales] = None, record_trajectory: bool = True,
             position_every: Optional[float] = None) -> RunResult:
    """Run until every scheduled vehicle has landed or `max_time` is reached.

    Observations are built from the world's perceived positions, so a noisy
    perceive hook affects both the policy inputs and the priority rule while
    the recorded trajectory and the safety metrics use the true states.
    """
    scales = scales or ObservationScales()
    L = policy.history
    histories: dict = {}
    nearest: dict = {}
    rows: list = []
    positions: list = []

    def record() -> None:
        t = world.time
        for v in world.vehicles:
            if record_trajectory:
                rows.append((t, v.id, v.position.n, v.position.e, v.heading, v.speed, v.entry_signal))
            if position_every is not None and _is_multiple(t, position_every):
                positions.append((v.position.n, v.position.e))

    record()
    while not world.done and world.time < max_time - 1e-9:
        if world.vehicles:
            seen = [dataclasses.replace(v, position=world.perceived.get(v.id, v.position))
                    for v in world.vehicles]
            obs = build_all_observations(seen, ORIGIN, scales)
            ids = [v.id for v in world.vehicles]
            for vid, o in zip(ids, obs):
                h = histories.get(vid)
                if h is None:
                    histories[vid] = deque([o] * L, maxlen=L)
                else:
                    h.append(o)
            actions = policy.act([tuple(histories[i]) for i in ids], ids, world.time)
            act_map = {i: float(np.clip(a, -1.0, 1.0)) for i, a in zip(ids, actions)}
        else:
            act_map = {}
        world, ev = step_environment(world, act_map)
        for vid in ev.landings:
            histories.pop(vid, None)
        for vid, d in ev.nearest.items():
            nearest.setdefault(vid, []).append((world.time, d))
        record()
    timed_out = not world.done
    metrics = compute_run_metrics(world.records, world.n_accidents, world.n_incidents,
                                  world.n_false_entrances, nearest, timed_out=timed_out)
    return RunResult(metrics, rows, positions, world.time)


def build_world(schedule, *, config: Optional[AirspaceConfig] = None, entrance_check: bool = False,
                noise: Optional[NoiseModel] = None,
                noise_rng: Optional[np.random.Generator] = None) -> AirspaceWorld:
    perceive = None
    if noise is not None and noise.sigma_n > 0:
        if noise_rng is None:
            raise ValueError("a noise generator is required when sigma_n > 0")
        perceive = perception(noise, noise_rng)
    return AirspaceWorld.from_schedule(schedule, config, entrance_check=entrance_check,
                                       perceive=perceive)


def run_schedule(policy: Policy, schedule, *, config: Optional[AirspaceConfig] = None,
                 entrance_check: bool = False, noise: Optional[NoiseModel] = None,
                 noise_rng: Optional[np.random.Generator] = None, max_time: float = 3600.0,
                 record_trajectory: bool = True, position_every: Optional[float] = None) -> RunResult:
    world = build_world(schedule, config=config, entrance_check=entrance_check, noise=noise,
                        noise_rng=noise_rng)
    return simulate(world, policy, max_time=max_time, record_trajectory=record_trajectory,
                    position_every=position_every)


def straight_to_vertiport(vehicle_id: int, time: float) -> float:
    """Scripted baseline: keep heading (gate spawns already point at the vertiport)."""
    return 0.0


def min_separation(result: RunResult) -> float:
    return min(result.metrics.min_distances().values(), default=math.inf)
