"""Local observations of one vehicle.

An observation is an own-info vector

    (bearing_to_vertiport / pi, distance_to_vertiport / D_SCALE, sigma)

and a (k, 6) block with one row per surrounding vehicle,

    (distance / D_SCALE, bearing / pi, (v_i - v_own) / V_SCALE,
     heading_delta / pi, d_cpa / CPA_D_SCALE, t_cpa / T_SCALE)

rows ordered by descending distance to the own vehicle (ties: lower id first).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    ORIGIN, GeometryError, VehicleState, cpa, distance, relative_bearing, wrap_angle,
)

D_SCALE = 1000.0
V_SCALE = 6.0
CPA_D_SCALE = 100.0
T_SCALE = 60.0

OWN_DIM = 3
TARGET_DIM = 6
OWN_FIELDS = ("bearing_to_vertiport", "distance_to_vertiport", "sigma")
TARGET_FIELDS = ("distance", "bearing", "speed_delta", "heading_delta", "d_cpa", "t_cpa")


@dataclass(frozen=True)
class ObservationScales:
    d_scale: float = D_SCALE
    v_scale: float = V_SCALE
    cpa_d_scale: float = CPA_D_SCALE
    t_scale: float = T_SCALE


@dataclass
class Observation:
    own: np.ndarray              # shape (3,)
    targets: np.ndarray          # shape (k, 6)
    target_ids: tuple = ()

    @property
    def n_targets(self) -> int:
        return self.targets.shape[0]

    @property
    def sigma(self) -> int:
        return int(self.own[2])

    def field(self, name: str):
        if name in OWN_FIELDS:
            return self.own[OWN_FIELDS.index(name)]
        return self.targets[:, TARGET_FIELDS.index(name)]


def build_observation(own: VehicleState, others: Sequence[VehicleState],
                      vertiport_midpoint=ORIGIN,
                      scales: ObservationScales = ObservationScales()) -> Observation:
    if any(o.id == own.id for o in others):
        raise ValueError(f"own vehicle {own.id} listed among others")
    d_v = distance(own.position, vertiport_midpoint)
    if d_v == 0.0:
        raise GeometryError("own vehicle sits on the vertiport midpoint")
    own_vec = np.array([
        relative_bearing(own.position, own.heading, vertiport_midpoint) / math.pi,
        d_v / scales.d_scale,
        float(own.entry_signal),
    ])
    rows = []
    own_vel = own.velocity
    for other in others:
        d = distance(own.position, other.position)
        d_cpa, t_cpa = cpa(own.position, own_vel, other.position, other.velocity)
        rows.append((d, other.id, (
            d / scales.d_scale,
            relative_bearing(own.position, own.heading, other.position) / math.pi,
            (other.speed - own.speed) / scales.v_scale,
            wrap_angle(other.heading - own.heading) / math.pi,
            d_cpa / scales.cpa_d_scale,
            t_cpa / scales.t_scale,
        )))
    rows.sort(key=lambda r: (-r[0], r[1]))
    targets = np.array([r[2] for r in rows], dtype=float).reshape(len(rows), TARGET_DIM)
    return Observation(own_vec, targets, tuple(r[1] for r in rows))


def build_all_observations(vehicles: Sequence[VehicleState], vertiport_midpoint=ORIGIN,
                           scales: ObservationScales = ObservationScales()) -> list[Observation]:
    """Vectorized equivalent of calling build_observation for every vehicle."""
    n = len(vehicles)
    if n == 0:
        return []
    ids = np.array([v.id for v in vehicles])
    pos = np.array([v.position for v in vehicles], dtype=float)
    hdg = np.array([v.heading for v in vehicles], dtype=float)
    spd = np.array([v.speed for v in vehicles], dtype=float)
    sig = np.array([v.entry_signal for v in vehicles], dtype=float)
    vel = np.stack([spd * np.cos(hdg), spd * np.sin(hdg)], axis=1)

    rel_v = np.asarray(vertiport_midpoint, dtype=float) - pos
    d_v = np.hypot(rel_v[:, 0], rel_v[:, 1])
    if np.any(d_v == 0.0):
        raise GeometryError("a vehicle sits on the vertiport midpoint")
    own = np.stack([
        wrap_angle(np.arctan2(rel_v[:, 1], rel_v[:, 0]) - hdg) / math.pi,
        d_v / scales.d_scale,
        sig,
    ], axis=1)
    if n == 1:
        return [Observation(own[0], np.zeros((0, TARGET_DIM)), ())]

    p = pos[None, :, :] - pos[:, None, :]            # [i, j] = pos_j - pos_i
    v = vel[None, :, :] - vel[:, None, :]
    d = np.hypot(p[..., 0], p[..., 1])
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] == 0.0):
        raise GeometryError("two vehicles share a position")
    vv = np.einsum("ijk,ijk->ij", v, v)
    pv = np.einsum("ijk,ijk->ij", p, v)
    moving = np.sqrt(vv) > 1e-9
    t_cpa = np.where(moving, np.maximum(0.0, -pv / np.where(moving, vv, 1.0)), 0.0)
    cp = p + t_cpa[..., None] * v
    d_cpa = np.hypot(cp[..., 0], cp[..., 1])
    # diagonal entries are never read; keep arctan2 well defined there
    bearing = wrap_angle(np.arctan2(p[..., 1], p[..., 0]) - hdg[:, None]) / math.pi
    feats = np.stack([
        d / scales.d_scale,
        bearing,
        (spd[None, :] - spd[:, None]) / scales.v_scale,
        wrap_angle(hdg[None, :] - hdg[:, None]) / math.pi,
        d_cpa / scales.cpa_d_scale,
        t_cpa / scales.t_scale,
    ], axis=-1)

    out = []
    for i in range(n):
        js = [j for j in range(n) if j != i]
        js.sort(key=lambda j: (-d[i, j], ids[j]))
        out.append(Observation(own[i], feats[i, js], tuple(int(ids[j]) for j in js)))
    return out
