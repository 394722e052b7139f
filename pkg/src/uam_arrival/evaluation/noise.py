from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..geometry import Vec2, VehicleState


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic zero-mean Gaussian position error, independent per axis, vehicle and step."""
    sigma_n: float = 0.0

    def __post_init__(self):
        if not self.sigma_n >= 0.0:
            raise ValueError("noise standard deviation must be non-negative")


def apply_position_noise(positions, noise: NoiseModel, rng: np.random.Generator) -> dict:
    """Noisy copy of a position map (id -> (n, e)) or of a vehicle list.

    With sigma_n == 0 the positions are returned unchanged and no random
    numbers are drawn.
    """
    if isinstance(positions, Mapping):
        items = list(positions.items())
    else:
        items = [(v.id, v.position) for v in positions]
    if noise.sigma_n == 0.0:
        return {vid: Vec2(*p) for vid, p in items}
    eps = rng.normal(0.0, noise.sigma_n, size=(len(items), 2))
    return {vid: Vec2(p[0] + eps[k, 0], p[1] + eps[k, 1]) for k, (vid, p) in enumerate(items)}


def perception(noise: NoiseModel, rng: np.random.Generator):
    """Hook for AirspaceWorld.perceive drawing fresh noise on every call."""
    def perceive(vehicles: Sequence[VehicleState]) -> dict:
        return apply_position_noise(vehicles, noise, rng)
    return perceive
