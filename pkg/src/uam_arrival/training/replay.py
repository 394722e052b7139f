from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TransitionRecord:
    obs_history: tuple        # h + 1 Observations, oldest first
    action: float
    reward: float
    next_obs_history: tuple
    terminal: bool

    @property
    def sigma(self) -> int:
        return self.obs_history[-1].sigma


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.storage: list = []
        self.cursor = 0

    def __len__(self) -> int:
        return len(self.storage)

    def add(self, record: TransitionRecord) -> None:
        if len(self.storage) < self.capacity:
            self.storage.append(record)
        else:
            self.storage[self.cursor] = record
        self.cursor = (self.cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int) -> list:
        """Distinct records drawn uniformly (without replacement within the batch)."""
        if not self.storage:
            raise ValueError("cannot sample from an empty buffer")
        n = min(batch_size, len(self.storage))
        idx = rng.choice(len(self.storage), size=n, replace=False)
        return [self.storage[i] for i in idx]

    def sigma_counts(self) -> dict:
        counts = {1: 0, -1: 0}
        for r in self.storage:
            counts[r.sigma] += 1
        return counts
