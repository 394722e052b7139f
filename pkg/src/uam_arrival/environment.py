"""Multi-agent airspace world.

One `AirspaceWorld` is mutated in place by `step_environment`; distinct
worlds are independent. Per step the order is: move, admit arrivals,
landings / false entrances, conflicts, landing priority, clock.
"""
from __future__ import annotations

import io
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .geometry import (
    ORIGIN, AirspaceConfig, Vec2, VehicleState, absolute_bearing, advance_state, distance,
    heading_vector, wrap_angle,
)

GATES = ("N", "E", "S", "W")
ENTRANCE_CLEARANCE = 300.0  # m


@dataclass(frozen=True)
class Arrival:
    time: float
    gate: str
    speed: float
    heading_noise: float = 0.0


@dataclass
class VertiportState:
    blocked_until: Optional[float] = None
    occupant: Optional[int] = None
    landing_start: Optional[float] = None

    def is_blocked(self, now: float) -> bool:
        return self.blocked_until is not None and self.blocked_until > now


@dataclass
class StepEvents:
    time: float = 0.0
    accidents: set = field(default_factory=set)        # pairs currently <= d_acc
    incidents: set = field(default_factory=set)        # pairs currently <= d_inc
    new_accidents: set = field(default_factory=set)    # onsets, counted once per violation interval
    new_incidents: set = field(default_factory=set)
    false_entrances: set = field(default_factory=set)
    landings: set = field(default_factory=set)
    landed_states: dict = field(default_factory=dict)  # id -> state at touchdown
    boundary_exits: set = field(default_factory=set)
    reinitialized: set = field(default_factory=set)
    admitted: list = field(default_factory=list)
    nearest: dict = field(default_factory=dict)        # id -> distance to closest other vehicle


@dataclass
class VehicleRecord:
    id: int
    spawn_time: float
    gate: Optional[str] = None
    signal_time: Optional[float] = None
    landing_time: Optional[float] = None


@dataclass
class AirspaceWorld:
    config: AirspaceConfig = field(default_factory=AirspaceConfig)
    time: float = 0.0
    vehicles: list = field(default_factory=list)
    vertiport: VertiportState = field(default_factory=VertiportState)
    pending_arrivals: deque = field(default_factory=deque)
    # "priority": nearest-vehicle rule assigns the entry signal;
    # "external": the caller sets signals (training episodes)
    signal_mode: str = "priority"
    training: bool = False
    entrance_check: bool = False
    rng: Optional[np.random.Generator] = None
    # maps the vehicle list to the positions used for decisions (noise hook)
    perceive: Optional[Callable[[Sequence[VehicleState]], dict]] = None
    perceived: dict = field(default_factory=dict)
    next_id: int = 0
    n_accidents: int = 0
    n_incidents: int = 0
    n_false_entrances: int = 0
    records: dict = field(default_factory=dict)
    _acc_active: set = field(default_factory=set)
    _inc_active: set = field(default_factory=set)
    _inside_unsignaled: set = field(default_factory=set)
    _outside_boundary: set = field(default_factory=set)

    @classmethod
    def from_schedule(cls, schedule: Iterable[Arrival], config: Optional[AirspaceConfig] = None,
                      entrance_check: bool = False, perceive=None) -> "AirspaceWorld":
        world = cls(config=config or AirspaceConfig(), entrance_check=entrance_check, perceive=perceive)
        world.pending_arrivals = deque(sorted(schedule, key=lambda a: a.time))
        world.admit_arrivals(world.time)
        world.refresh_perception()
        world.assign_priority(world.time)
        return world

    @classmethod
    def for_training(cls, n_vehicles: int, rng: np.random.Generator,
                     config: Optional[AirspaceConfig] = None) -> "AirspaceWorld":
        world = cls(config=config or AirspaceConfig(), signal_mode="external", training=True, rng=rng)
        for _ in range(n_vehicles):
            world.add_vehicle(spawn_training_vehicle(rng, world.config, world.next_id, world.time))
        world.refresh_perception()
        return world

    # bookkeeping

    def add_vehicle(self, v: VehicleState, gate: Optional[str] = None) -> None:
        if any(o.id == v.id for o in self.vehicles):
            raise ValueError(f"duplicate vehicle id {v.id}")
        self.vehicles.append(v)
        self.next_id = max(self.next_id, v.id + 1)
        self.records[v.id] = VehicleRecord(v.id, v.spawn_time, gate, v.signal_time)

    def vehicle(self, vid: int) -> VehicleState:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def set_signal(self, vid: int, sigma: int, now: Optional[float] = None) -> None:
        v = self.vehicle(vid)
        if sigma == 1 and v.entry_signal != 1:
            v.entry_signal = 1
            v.signal_time = self.time if now is None else now
            self.records[vid].signal_time = v.signal_time
        elif sigma == -1:
            v.entry_signal = -1

    def refresh_perception(self) -> None:
        if self.perceive is None:
            self.perceived = {v.id: v.position for v in self.vehicles}
        else:
            self.perceived = self.perceive(self.vehicles)

    @property
    def done(self) -> bool:
        return not self.vehicles and not self.pending_arrivals

    # step stages

    def admit_arrivals(self, now: float) -> list:
        admitted = []
        still_pending = deque()
        while self.pending_arrivals:
            arr = self.pending_arrivals.popleft()
            if arr.time > now + 1e-9:
                still_pending.append(arr)
                continue
            gate = entrance_safety_check(self, arr.gate) if self.entrance_check else arr.gate
            if gate is None:
                still_pending.append(arr)   # retried next step
                continue
            v = spawn_gate_vehicle(gate, arr.heading_noise, arr.speed, self.config,
                                   vehicle_id=self.next_id, time=now)
            self.add_vehicle(v, gate)
            admitted.append(v.id)
        self.pending_arrivals = still_pending
        return admitted

    def assign_priority(self, now: float) -> Optional[int]:
        if self.signal_mode != "priority":
            return None
        vid = select_priority(self, now=now)
        if vid is not None and self.vehicle(vid).entry_signal != 1:
            self.set_signal(vid, 1, now)
        return vid


def select_priority(world: AirspaceWorld, now: Optional[float] = None,
                    positions: Optional[Mapping[int, Vec2]] = None) -> Optional[int]:
    """Vehicle cleared to enter the VTOL zone.

    A vehicle already holding the signal keeps it. Otherwise, if the
    vertiport is free, the vehicle nearest to the midpoint is chosen
    (ties to the lowest id). Distances use `positions` when given,
    else the world's perceived positions.
    """
    for v in world.vehicles:
        if v.entry_signal == 1:
            return v.id
    now = world.time if now is None else now
    if not world.vehicles or world.vertiport.is_blocked(now):
        return None
    if positions is None:
        positions = world.perceived or {v.id: v.position for v in world.vehicles}
    best = min(world.vehicles,
               key=lambda v: (distance(positions.get(v.id, v.position), ORIGIN), v.id))
    return best.id


def detect_conflicts(world_or_vehicles, config: Optional[AirspaceConfig] = None):
    """Current accident and incident pairs plus each vehicle's nearest-neighbour distance.

    Returns (accidents, incidents, nearest) with pairs as (low_id, high_id).
    """
    if isinstance(world_or_vehicles, AirspaceWorld):
        vehicles, cfg = world_or_vehicles.vehicles, world_or_vehicles.config
    else:
        vehicles, cfg = world_or_vehicles, config or AirspaceConfig()
    accidents, incidents, nearest = set(), set(), {}
    n = len(vehicles)
    if n < 2:
        return accidents, incidents, nearest
    pos = np.array([v.position for v in vehicles], dtype=float)
    d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    np.fill_diagonal(d, np.inf)
    ids = [v.id for v in vehicles]
    for i, vid in enumerate(ids):
        nearest[vid] = float(d[i].min())
    ii, jj = np.nonzero(np.triu(d <= cfg.d_inc, 1))
    for i, j in zip(ii, jj):
        pair = (min(ids[i], ids[j]), max(ids[i], ids[j]))
        incidents.add(pair)
        if d[i, j] <= cfg.d_acc:
            accidents.add(pair)
    return accidents, incidents, nearest


def step_environment(world: AirspaceWorld, actions: Mapping[int, float]):
    """Advance the world by one dt. Mutates and returns the world with the step's events."""
    cfg = world.config
    missing = [v.id for v in world.vehicles if v.id not in actions]
    if missing:
        raise ValueError(f"missing actions for vehicles {missing}")
    now = world.time + cfg.dt
    ev = StepEvents(time=now)

    # (1) move
    world.vehicles = [advance_state(v, float(actions[v.id]), cfg) for v in world.vehicles]
    for k, v in enumerate(world.vehicles):
        d = distance(v.position, ORIGIN)
        if d >= cfg.boundary_penalty_radius:
            if v.id not in world._outside_boundary:
                ev.boundary_exits.add(v.id)
                world._outside_boundary.add(v.id)
        else:
            world._outside_boundary.discard(v.id)
        if world.training and d > cfg.reinit_radius:
            fresh = spawn_training_vehicle(world.rng, cfg, v.id, v.spawn_time)
            fresh.entry_signal, fresh.signal_time = v.entry_signal, v.signal_time
            world.vehicles[k] = fresh
            world._outside_boundary.discard(v.id)
            ev.reinitialized.add(v.id)

    # (2) arrivals
    ev.admitted = world.admit_arrivals(now)

    # (3) landings and false entrances
    remaining = []
    for v in world.vehicles:
        inside = distance(v.position, ORIGIN) <= cfg.vtol_radius
        if inside and v.entry_signal == 1 and not world.vertiport.is_blocked(now):
            ev.landings.add(v.id)
            ev.landed_states[v.id] = v
            world.vertiport = VertiportState(blocked_until=now + cfg.t_land, occupant=v.id,
                                             landing_start=now)
            world.records[v.id].landing_time = now
            world._inside_unsignaled.discard(v.id)
            continue
        if inside and v.entry_signal != 1:
            if v.id not in world._inside_unsignaled:
                ev.false_entrances.add(v.id)
                world._inside_unsignaled.add(v.id)
                world.n_false_entrances += 1
        elif not inside:
            world._inside_unsignaled.discard(v.id)
        remaining.append(v)
    world.vehicles = remaining
    if world.vertiport.occupant is not None and not world.vertiport.is_blocked(now):
        world.vertiport = VertiportState()

    # (4) conflicts
    ev.accidents, ev.incidents, ev.nearest = detect_conflicts(world)
    ev.new_accidents = ev.accidents - world._acc_active
    ev.new_incidents = ev.incidents - world._inc_active
    world._acc_active, world._inc_active = set(ev.accidents), set(ev.incidents)
    world.n_accidents += len(ev.new_accidents)
    world.n_incidents += len(ev.new_incidents)

    # (5) priority on the positions the vehicles will decide on
    world.refresh_perception()
    world.assign_priority(now)

    # (6) clock
    world.time = now
    return world, ev


def spawn_training_vehicle(rng: np.random.Generator, cfg: AirspaceConfig, vehicle_id: int = 0,
                           time: float = 0.0) -> VehicleState:
    """Vehicle on the outer threshold at a uniform angle, heading roughly at the centre."""
    angle = rng.uniform(0.0, 2 * math.pi)
    pos = heading_vector(angle).scale(cfg.outer_radius)
    sign = -1.0 if rng.random() < 0.5 else 1.0
    noise = sign * math.radians(rng.uniform(20.0, 45.0))
    heading = wrap_angle(angle + math.pi + noise)
    speed = rng.uniform(10.0, 16.0)
    return VehicleState(vehicle_id, pos, heading, speed, -1, time)


def spawn_gate_vehicle(gate: str, heading_noise: float, speed: float,
                       cfg: Optional[AirspaceConfig] = None, vehicle_id: int = 0,
                       time: float = 0.0) -> VehicleState:
    cfg = cfg or AirspaceConfig()
    pos = cfg.gate_position(gate)
    heading = wrap_angle(absolute_bearing(pos, ORIGIN) + heading_noise)
    return VehicleState(vehicle_id, pos, heading, float(speed), -1, time)


def entrance_safety_check(world: AirspaceWorld, requested_gate: str) -> Optional[str]:
    """First clear gate in N -> E -> S -> W rotation starting at the requested one."""
    names = [g for g, _ in world.config.gate_angles]
    if requested_gate not in names:
        raise ValueError(f"unknown gate {requested_gate!r}")
    start = names.index(requested_gate)
    for k in range(len(names)):
        gate = names[(start + k) % len(names)]
        gpos = world.config.gate_position(gate)
        if all(distance(v.position, gpos) >= ENTRANCE_CLEARANCE for v in world.vehicles):
            return gate
    return None


# traffic schedules

def generate_wave_schedule(n_waves: int = 3, gap: float = 30.0, speed: float = 13.0) -> list:
    return [Arrival(w * gap, g, speed, 0.0) for w in range(n_waves) for g in GATES]


def generate_stream_schedule(n: int, rng: np.random.Generator, gap: float = 15.0,
                             max_heading_noise_deg: float = 20.0,
                             speed_range=(10.0, 16.0)) -> list:
    if n < 1:
        raise ValueError("stream schedule needs at least one arrival")
    out = []
    for k in range(n):
        gate = GATES[int(rng.integers(0, 4))]
        noise = math.radians(rng.uniform(-max_heading_noise_deg, max_heading_noise_deg))
        speed = rng.uniform(*speed_range)
        out.append(Arrival(k * gap, gate, speed, noise))
    return out


def generate_poisson_schedule(rng: np.random.Generator, n_clusters: int = 4,
                              cluster_gap: float = 120.0, lam: float = 5.0,
                              intra_gap: float = 10.0, gate: str = "S",
                              max_heading_noise_deg: float = 20.0,
                              speed_range=(10.0, 16.0)) -> list:
    out = []
    for c in range(n_clusters):
        size = int(rng.poisson(lam))
        for k in range(size):
            noise = math.radians(rng.uniform(-max_heading_noise_deg, max_heading_noise_deg))
            speed = rng.uniform(*speed_range)
            out.append(Arrival(c * cluster_gap + k * intra_gap, gate, speed, noise))
    return out


SCHEDULE_HEADER = "# time_s gate speed_mps heading_noise_rad"


def dump_schedule(schedule: Iterable[Arrival]) -> str:
    lines = [SCHEDULE_HEADER]
    for a in schedule:
        lines.append(f"{a.time!r} {a.gate} {a.speed!r} {a.heading_noise!r}")
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> list:
    out = []
    for lineno, line in enumerate(io.StringIO(text), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4 or parts[1] not in GATES:
            raise ValueError(f"schedule line {lineno}: expected 'time gate speed heading_noise'")
        out.append(Arrival(float(parts[0]), parts[1], float(parts[2]), float(parts[3])))
    return out


def write_schedule(path: str | os.PathLike, schedule: Iterable[Arrival]) -> None:
    with open(path, "w") as fh:
        fh.write(dump_schedule(schedule))


def read_schedule(path: str | os.PathLike) -> list:
    with open(path) as fh:
        return parse_schedule(fh.read())
