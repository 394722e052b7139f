"""Four-component reward: collision risk, goal progress, airspace bound, comfort."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class RewardConfig:
    d_inc: float = 100.0
    collision_penalty: float = -10.0
    c1: float = -5.0
    c2: float = 160.5
    c4: float = 10.0
    c5: float = 200.0
    false_entrance_penalty: float = -5.0
    boundary_radius: float = 1000.0
    boundary_penalty: float = -5.0
    w_coll: float = 3 / 7
    w_goal: float = 3 / 7
    w_space: float = 2 / 7
    w_comf: float = 2 / 7


DEFAULT = RewardConfig()


@dataclass(frozen=True)
class RewardBreakdown:
    r_coll: float
    r_goal: float
    r_space: float
    r_comf: float
    total: float


def collision_reward(d_min: Optional[float], cfg: RewardConfig = DEFAULT) -> float:
    """Penalty from the distance to the closest other vehicle; None means nobody else is around."""
    if d_min is None:
        return 0.0
    if d_min <= cfg.d_inc:
        return cfg.collision_penalty
    return collision_tail(d_min, cfg)


def collision_tail(d_min: float, cfg: RewardConfig = DEFAULT) -> float:
    """Gaussian branch of the collision term (used for d_min above the incident distance)."""
    return cfg.c1 * math.exp(-((d_min - cfg.d_inc) ** 2) / cfg.c2 ** 2)


def goal_reward(sigma: int, d_prev: float, d_now: float, cfg: RewardConfig = DEFAULT) -> float:
    if sigma == 1:
        return (d_prev - d_now) / cfg.c4
    if d_now <= cfg.c5:
        return cfg.false_entrance_penalty
    return 0.0


def space_reward(d_vertiport: float, cfg: RewardConfig = DEFAULT) -> float:
    return cfg.boundary_penalty if d_vertiport >= cfg.boundary_radius else 0.0


def comfort_reward(action: float) -> float:
    if not abs(action) <= 1.0:
        raise ValueError(f"action {action} outside [-1, 1]")
    return -(action ** 4)


def total_reward(r_coll: float, r_goal: float, r_space: float, r_comf: float,
                 cfg: RewardConfig = DEFAULT) -> RewardBreakdown:
    total = cfg.w_coll * r_coll + cfg.w_goal * r_goal + cfg.w_space * r_space + cfg.w_comf * r_comf
    return RewardBreakdown(r_coll, r_goal, r_space, r_comf, total)


def step_reward(d_min: Optional[float], sigma: int, d_prev: float, d_now: float, action: float,
                cfg: RewardConfig = DEFAULT) -> RewardBreakdown:
    """Reward of one transition, evaluated on the post-step state."""
    return total_reward(
        collision_reward(d_min, cfg),
        goal_reward(sigma, d_prev, d_now, cfg),
        space_reward(d_now, cfg),
        comfort_reward(action),
        cfg,
    )
