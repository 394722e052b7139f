"""LSTM-TD3 training: replay buffer, curriculum, update rule, episode loop."""
from .curriculum import CurriculumSchedule, sample_vehicle_count
from .loop import EpisodeStats, episode_loop, evaluate, read_curve, run_training, smooth
from .replay import ReplayBuffer, TransitionRecord
from .td3 import Trainer, exploration_action, load_actor, save_policy, soft_update, td3_update

__all__ = [
    "CurriculumSchedule", "sample_vehicle_count", "EpisodeStats", "episode_loop", "evaluate",
    "read_curve", "run_training", "smooth", "ReplayBuffer", "TransitionRecord", "Trainer",
    "exploration_action", "load_actor", "save_policy", "soft_update", "td3_update",
]
