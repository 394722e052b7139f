"""LSTM-TD3 learner state and update rule."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .. import checkpoint as ckpt
from ..config import Config
from ..neural import Adam, Network, collate
from .replay import ReplayBuffer

NETS = ("actor", "critic1", "critic2")
CHECKPOINT_FORMAT = "uam-trainer"


class Trainer:
    """Actor, twin critics, their target copies, optimizers, step counters and RNG."""

    def __init__(self, cfg: Config, rng: Optional[np.random.Generator] = None):
        self.cfg = cfg
        seq = np.random.SeedSequence(cfg.training.seed)
        init_seq, train_seq, env_seq = seq.spawn(3)
        init_rng = np.random.default_rng(init_seq)
        self.rng = rng if rng is not None else np.random.default_rng(train_seq)
        self.env_rng = np.random.default_rng(env_seq)
        kw = dict(history=cfg.network.history, hidden=cfg.network.hidden)
        self.actor = Network.create("actor", init_rng, **kw)
        self.critic1 = Network.create("critic", init_rng, **kw)
        self.critic2 = Network.create("critic", init_rng, **kw)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        t = cfg.td3
        self.actor_opt = Adam(t.actor_lr)
        self.critic1_opt = Adam(t.critic_lr)
        self.critic2_opt = Adam(t.critic_lr)
        self.buffer = ReplayBuffer(t.buffer_size)
        self.global_step = 0
        self.n_updates = 0
        self.episodes = 0

    # acting

    def act(self, histories: Sequence[Sequence], noise_mask=None) -> np.ndarray:
        """Deterministic actions for a batch of histories, plus exploration noise where masked."""
        actions, _ = self.actor.forward(collate(histories))
        if noise_mask is not None and self.cfg.td3.explore_sigma > 0:
            noise = self.rng.normal(0.0, self.cfg.td3.explore_sigma, size=actions.shape)
            actions = np.clip(actions + noise * np.asarray(noise_mask, dtype=float), -1.0, 1.0)
        return actions

    # persistence

    def state_arrays(self) -> dict:
        arrays = {}
        for name in NETS:
            for suffix, net in (("", getattr(self, name)), (".target", getattr(self, f"{name}_target"))):
                for k, v in net.params.items():
                    arrays[f"{name}{suffix}/{k}"] = v
            arrays.update(getattr(self, f"{name}_opt").state_arrays(f"{name}.opt"))
        return arrays

    def metadata(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "global_step": self.global_step,
            "n_updates": self.n_updates,
            "episodes": self.episodes,
            "opt_t": {n: getattr(self, f"{n}_opt").t for n in NETS},
            "rng": self.rng.bit_generator.state,
            "env_rng": self.env_rng.bit_generator.state,
            "config": self.cfg.to_dict(),
        }

    def save(self, path) -> None:
        ckpt.save(path, self.state_arrays(), self.metadata())

    def load_state(self, arrays: dict, meta: dict) -> None:
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ckpt.CheckpointError("checkpoint was not written by a trainer")
        for name in NETS:
            for suffix in ("", ".target"):
                net = getattr(self, name + ("_target" if suffix else ""))
                for k in net.params:
                    key = f"{name}{suffix}/{k}"
                    if key not in arrays or arrays[key].shape != net.params[k].shape:
                        raise ckpt.CheckpointError(f"checkpoint lacks {key} with shape {net.params[k].shape}")
                    net.params[k] = arrays[key].copy()
            opt_arrays = {k: v for k, v in arrays.items() if k.startswith(f"{name}.opt.")}
            getattr(self, f"{name}_opt").load_state_arrays(f"{name}.opt", opt_arrays, meta["opt_t"][name])
        self.global_step = meta["global_step"]
        self.n_updates = meta["n_updates"]
        self.episodes = meta.get("episodes", 0)
        self.rng.bit_generator.state = meta["rng"]
        self.env_rng.bit_generator.state = meta["env_rng"]


def load_actor(path, cfg: Optional[Config] = None) -> Network:
    """Actor network from either a trainer checkpoint or a policy-only checkpoint."""
    arrays, meta = ckpt.load(path)
    prefix = "actor/"
    params = {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}
    if not params:
        raise ckpt.CheckpointError(f"{path}: no actor parameters found")
    try:
        return Network("actor", params)
    except (KeyError, ValueError) as exc:
        raise ckpt.CheckpointError(f"{path}: actor parameters incompatible ({exc})") from exc


def save_policy(path, actor: Network, metadata: Optional[dict] = None) -> None:
    meta = {"format": "uam-policy"}
    meta.update(metadata or {})
    ckpt.save(path, {f"actor/{k}": v for k, v in actor.params.items()}, meta)


def exploration_action(actor: Network, history, rng: np.random.Generator, sigma: float = 0.1) -> float:
    a, _ = actor.forward(history)
    if sigma > 0:
        a = a + rng.normal(0.0, sigma, size=a.shape)
    return float(np.clip(a[0], -1.0, 1.0))


def soft_update(target: Network, source: Network, tau: float) -> None:
    for k, v in source.params.items():
        t = target.params[k]
        t *= 1.0 - tau
        t += tau * v


def td3_update(trainer: Trainer, batch: Sequence) -> dict:
    """One critic step on a list of TransitionRecords; actor and targets every policy_delay calls."""
    if not batch:
        raise ValueError("empty batch")
    t = trainer.cfg.td3
    B = len(batch)
    obs = collate([r.obs_history for r in batch])
    nxt = collate([r.next_obs_history for r in batch])
    actions = np.array([r.action for r in batch], dtype=float)
    rewards = np.array([r.reward for r in batch], dtype=float)
    not_done = 1.0 - np.array([r.terminal for r in batch], dtype=float)

    a_next, _ = trainer.actor_target.forward(nxt)
    smooth = np.clip(trainer.rng.normal(0.0, t.target_noise, size=B), -t.target_noise_clip, t.target_noise_clip)
    a_next = np.clip(a_next + smooth, -1.0, 1.0)
    q1_next, _ = trainer.critic1_target.forward(nxt, a_next)
    q2_next, _ = trainer.critic2_target.forward(nxt, a_next)
    y = rewards + t.gamma * not_done * np.minimum(q1_next, q2_next)

    info = {"target": y}
    for name in ("critic1", "critic2"):
        net, opt = getattr(trainer, name), getattr(trainer, f"{name}_opt")
        q, cache = net.forward(obs, actions)
        err = q - y
        grads, _ = net.backward(cache, 2.0 * err / B)
        opt.step(net.params, grads)
        info[f"{name}_loss"] = float(np.mean(err ** 2))

    trainer.n_updates += 1
    if trainer.n_updates % t.policy_delay == 0:
        a_pi, a_cache = trainer.actor.forward(obs)
        q, q_cache = trainer.critic1.forward(obs, a_pi)
        _, dq_da = trainer.critic1.backward(q_cache, np.full(B, -1.0 / B), need_params=False)
        grads, _ = trainer.actor.backward(a_cache, dq_da)
        trainer.actor_opt.step(trainer.actor.params, grads)
        info["actor_loss"] = float(-np.mean(q))
        for name in ("actor", "critic1", "critic2"):
            soft_update(getattr(trainer, f"{name}_target"), getattr(trainer, name), t.tau)
    return info
