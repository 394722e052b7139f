from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CurriculumSchedule:
    boundaries: tuple = (0, 1_000_000, 1_500_000, 2_000_000)
    ranges: tuple = ((3, 8), (8, 15), (15, 25))
    enabled: bool = True
    fixed_count: int = 25

    @classmethod
    def from_config(cls, c) -> "CurriculumSchedule":
        return cls(tuple(c.boundaries), tuple(tuple(r) for r in c.ranges), c.enabled, c.fixed_count)

    def phase(self, global_step: int) -> int:
        """Index of the active phase; steps past the last boundary stay in the last phase."""
        k = bisect.bisect_right(self.boundaries, global_step) - 1
        return min(max(k, 0), len(self.ranges) - 1)

    def count_range(self, global_step: int) -> tuple:
        if not self.enabled:
            return (self.fixed_count, self.fixed_count)
        return self.ranges[self.phase(global_step)]


def sample_vehicle_count(schedule: CurriculumSchedule, global_step: int,
                         rng: np.random.Generator) -> int:
    lo, hi = schedule.count_range(global_step)
    return int(rng.integers(lo, hi + 1))
