"""Geometry and kinematics of the terminal airspace.

All coordinates are (north, east) in meters. Headings and bearings are
measured clockwise from north, in radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

TWO_PI = 2.0 * math.pi
CPA_EPS = 1e-9  # m/s, relative speeds below this are treated as parallel motion


class GeometryError(ValueError):
    """Raised for degenerate geometry such as coincident positions."""


class Vec2(NamedTuple):
    n: float
    e: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.n + other[0], self.e + other[1])

    def __sub__(self, other):
        return Vec2(self.n - other[0], self.e - other[1])

    def scale(self, k: float) -> "Vec2":
        return Vec2(self.n * k, self.e * k)

    def dot(self, other) -> float:
        return self.n * other[0] + self.e * other[1]

    def norm(self) -> float:
        return math.hypot(self.n, self.e)


ORIGIN = Vec2(0.0, 0.0)


@dataclass
class VehicleState:
    id: int
    position: Vec2
    heading: float
    speed: float
    entry_signal: int = -1
    spawn_time: float = 0.0
    signal_time: Optional[float] = None

    @property
    def velocity(self) -> Vec2:
        return heading_vector(self.heading).scale(self.speed)


@dataclass(frozen=True)
class AirspaceConfig:
    vtol_radius: float = 200.0
    outer_radius: float = 800.0
    boundary_penalty_radius: float = 1000.0
    reinit_radius: float = 1200.0
    d_acc: float = 10.0
    d_inc: float = 100.0
    t_land: float = 60.0
    dt: float = 1.0
    heading_increment: float = math.radians(5.0)
    # (name, compass bearing) pairs; order defines the N -> E -> S -> W rotation
    gate_angles: tuple = (
        ("N", 0.0), ("E", math.pi / 2), ("S", math.pi), ("W", 3 * math.pi / 2))

    def __post_init__(self):
        if not 0 < self.vtol_radius < self.outer_radius < self.boundary_penalty_radius < self.reinit_radius:
            raise ValueError("airspace radii must satisfy 0 < vtol < outer < boundary < reinit")
        if not 0 < self.d_acc < self.d_inc:
            raise ValueError("need 0 < d_acc < d_inc")
        if self.dt <= 0 or self.t_land < 0 or self.heading_increment <= 0:
            raise ValueError("dt and heading_increment must be positive, t_land non-negative")

    @property
    def gates(self) -> dict:
        return dict(self.gate_angles)

    def gate_position(self, gate: str) -> Vec2:
        try:
            bearing = self.gates[gate]
        except KeyError:
            raise ValueError(f"unknown gate {gate!r}; expected one of {list(self.gates)}") from None
        return heading_vector(bearing).scale(self.outer_radius)


def wrap_angle(theta):
    """Map an angle (scalar or array) into [-pi, pi).

    Uses theta - floor((theta + pi) / 2pi) * 2pi for every sign of theta,
    which keeps -pi inside the interval.
    """
    if isinstance(theta, np.ndarray):
        if not np.all(np.isfinite(theta)):
            raise ValueError("wrap_angle: non-finite input")
        out = theta - np.floor((theta + math.pi) / TWO_PI) * TWO_PI
        out = np.where(out >= math.pi, out - TWO_PI, out)
        return np.where(out < -math.pi, -math.pi, out)
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"wrap_angle: non-finite input {theta!r}")
    out = theta - math.floor((theta + math.pi) / TWO_PI) * TWO_PI
    # float rounding can land exactly on +pi or a hair below -pi
    if out >= math.pi:
        out -= TWO_PI
    if out < -math.pi:
        out = -math.pi
    return out


def heading_vector(heading: float) -> Vec2:
    return Vec2(math.cos(heading), math.sin(heading))


def absolute_bearing(from_pos, to_pos) -> float:
    dn = to_pos[0] - from_pos[0]
    de = to_pos[1] - from_pos[1]
    if dn == 0.0 and de == 0.0:
        raise GeometryError("bearing undefined for coincident positions")
    b = math.atan2(de, dn)
    return -math.pi if b == math.pi else b


def relative_bearing(own_pos, own_heading: float, target_pos) -> float:
    return wrap_angle(absolute_bearing(own_pos, target_pos) - own_heading)


def distance(a, b) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def cpa(own_pos, own_vel, target_pos, target_vel) -> tuple[float, float]:
    """Distance and time to the closest point of approach under straight-line motion.

    Returns (d_cpa, t_cpa); t_cpa is clamped at 0 so diverging pairs
    report their current separation.
    """
    pn = target_pos[0] - own_pos[0]
    pe = target_pos[1] - own_pos[1]
    vn = target_vel[0] - own_vel[0]
    ve = target_vel[1] - own_vel[1]
    vv = vn * vn + ve * ve
    if math.sqrt(vv) > CPA_EPS:
        t = max(0.0, -(pn * vn + pe * ve) / vv)
    else:
        t = 0.0
    return math.hypot(pn + t * vn, pe + t * ve), t


def advance_state(state: VehicleState, action: float, cfg: AirspaceConfig) -> VehicleState:
    """Turn by action * heading_increment, then fly one dt along the new heading."""
    if not abs(action) <= 1.0:
        raise ValueError(f"action must lie in [-1, 1], got {action!r}")
    heading = wrap_angle(state.heading + action * cfg.heading_increment)
    step = cfg.dt * state.speed
    pos = Vec2(state.position.n + step * math.cos(heading),
               state.position.e + step * math.sin(heading))
    return replace(state, position=pos, heading=heading)
