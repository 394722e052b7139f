"""Training episodes, periodic evaluation, checkpoints and the training curve."""
from __future__ import annotations

import logging
import os
import pickle
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import checkpoint as ckpt
from ..config import Config
from ..environment import AirspaceWorld, step_environment
from ..geometry import ORIGIN, distance
from ..observation import build_all_observations, build_observation
from ..reward import step_reward
from .curriculum import CurriculumSchedule, sample_vehicle_count
from .replay import TransitionRecord
from .td3 import Trainer, save_policy, td3_update

log = logging.getLogger(__name__)

CURVE_HEADER = "step,mean_eval_return,smoothed_return"


@dataclass
class EpisodeStats:
    n_vehicles: int
    main_id: int
    steps: int = 0
    episode_return: float = 0.0
    landed: bool = False
    stored: int = 0
    stored_signal: int = 0
    transitions: list = field(default_factory=list)


def _push(hist: Optional[deque], obs, length: int) -> deque:
    if hist is None:
        hist = deque([obs] * length, maxlen=length)   # pad by repeating the first observation
    else:
        hist.append(obs)
    return hist


def episode_loop(trainer: Trainer, n_vehicles: int, rng: np.random.Generator, *,
                 explore: bool = True, store: bool = True,
                 on_step: Optional[Callable[[Trainer], None]] = None,
                 max_steps: Optional[int] = None,
                 collect: bool = False) -> EpisodeStats:
    """Run one training-style episode with the shared policy.

    A uniformly chosen main agent is the only one whose transitions are
    kept. Every vehicle is told not to enter the vertiport for the first
    `signal_step` steps; afterwards the main agent alone gets the signal.
    The episode stops when the main agent lands or after `episode_steps`.
    `on_step` runs after every environment step (gradient updates, evaluation).
    """
    cfg = trainer.cfg
    acfg = cfg.airspace.build()
    rcfg = cfg.reward.build()
    scales = cfg.observation.build()
    L = cfg.network.history
    world = AirspaceWorld.for_training(n_vehicles, rng, acfg)
    main = int(rng.integers(0, n_vehicles))
    stats = EpisodeStats(n_vehicles, main)
    histories: dict = {}
    limit = cfg.training.episode_steps if max_steps is None else min(max_steps, cfg.training.episode_steps)

    def observe():
        obs = build_all_observations(world.vehicles, ORIGIN, scales)
        for v, o in zip(world.vehicles, obs):
            histories[v.id] = _push(histories.get(v.id), o, L)

    observe()
    for k in range(1, limit + 1):
        ids = [v.id for v in world.vehicles]
        hists = [tuple(histories[i]) for i in ids]
        noise_mask = None
        if explore:
            noise_mask = [1.0 if (i == main or cfg.td3.explore_background) else 0.0 for i in ids]
        actions = trainer.act(hists, noise_mask)
        act_map = dict(zip(ids, (float(a) for a in actions)))
        main_state = world.vehicle(main)
        obs_hist = hists[ids.index(main)]
        sigma = main_state.entry_signal
        d_prev = distance(main_state.position, ORIGIN)

        world, ev = step_environment(world, act_map)

        landed = main in ev.landings
        after = ev.landed_states[main] if landed else world.vehicle(main)
        d_now = distance(after.position, ORIGIN)
        if landed:
            others = world.vehicles
            d_min = min((distance(after.position, o.position) for o in others), default=None)
        else:
            d_min = ev.nearest.get(main)
        r = step_reward(d_min, sigma, d_prev, d_now, act_map[main], rcfg).total
        stats.episode_return += r
        stats.steps = k

        # the signal for the next decision is set before observing
        if k == cfg.training.signal_step and not landed:
            world.set_signal(main, 1, world.time)
        if landed:
            next_obs = build_observation(after, world.vehicles, ORIGIN, scales)
            next_hist = tuple(list(obs_hist[1:]) + [next_obs])
        else:
            observe()
            next_hist = tuple(histories[main])
        if store or collect:
            rec = TransitionRecord(obs_hist, act_map[main], r, next_hist, landed)
            if store:
                trainer.buffer.add(rec)
                stats.stored += 1
                stats.stored_signal += rec.sigma == 1
            if collect:
                stats.transitions.append(rec)
        if on_step is not None:
            on_step(trainer)
        if landed:
            stats.landed = True
            break
    return stats


def evaluate(trainer: Trainer, global_step: int, episodes: Optional[int] = None) -> list:
    """Returns of exploration-free episodes; nothing is stored."""
    cfg = trainer.cfg
    episodes = cfg.training.eval_episodes if episodes is None else episodes
    schedule = CurriculumSchedule.from_config(cfg.curriculum)
    rng = np.random.default_rng([cfg.training.seed, 7919, global_step])
    returns = []
    for _ in range(episodes):
        n = sample_vehicle_count(schedule, global_step, rng)
        stats = episode_loop(trainer, n, rng, explore=False, store=False)
        returns.append(stats.episode_return)
    return returns


def smooth(values, alpha: float) -> list:
    out, s = [], None
    for v in values:
        s = v if s is None else alpha * s + (1.0 - alpha) * v
        out.append(s)
    return out


def read_curve(path) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CURVE_HEADER:
            raise ValueError(f"{path}: unexpected curve header {header!r}")
        for line in fh:
            if line.strip():
                step, raw, sm = line.split(",")
                rows.append((int(step), float(raw), float(sm)))
    return rows


@dataclass
class TrainingRun:
    outdir: Path
    trainer: Trainer
    curve: list
    milestones: dict


def milestone_path(outdir, step: int) -> Path:
    return Path(outdir) / f"policy_step{step:08d}.ckpt"


def run_training(cfg: Config, outdir, resume: bool = False, stop_at_step: Optional[int] = None,
                 progress: Optional[Callable[[str], None]] = None) -> TrainingRun:
    """Train until cfg.training.total_steps.

    Writes into outdir: curve.csv, milestone policies policy_stepXXXXXXXX.ckpt,
    trainer.ckpt + replay.pkl (resume state, written at episode boundaries)
    and policy_final.ckpt. With stop_at_step the run halts at the first
    episode boundary at or after that step, leaving a resumable state.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ckpt.CheckpointError(f"cannot create output directory {outdir}: {exc}") from exc
    tcfg = cfg.training
    trainer = Trainer(cfg)
    curve: list = []
    if resume and (outdir / "trainer.ckpt").exists():
        arrays, meta = ckpt.load(outdir / "trainer.ckpt")
        trainer.load_state(arrays, meta)
        try:
            with open(outdir / "replay.pkl", "rb") as fh:
                trainer.buffer = pickle.load(fh)
        except OSError as exc:
            raise ckpt.CheckpointError(f"cannot read replay state in {outdir}: {exc}") from exc
        curve = [row for row in read_curve(outdir / "curve.csv") if row[0] <= trainer.global_step]
    else:
        with open(outdir / "curve.csv", "w") as fh:
            fh.write(CURVE_HEADER + "\n")
        with open(outdir / "config.yaml", "w") as fh:
            fh.write(cfg.dumps())
    schedule = CurriculumSchedule.from_config(cfg.curriculum)
    milestones = {m: milestone_path(outdir, m) for m in tcfg.milestones if m <= tcfg.total_steps}
    if trainer.global_step == 0 and 0 in milestones:
        save_policy(milestones[0], trainer.actor, {"global_step": 0})
    smoothed = curve[-1][2] if curve else None
    next_resume_save = (trainer.global_step // tcfg.checkpoint_every + 1) * tcfg.checkpoint_every

    def on_step(tr: Trainer) -> None:
        nonlocal smoothed
        tr.global_step += 1
        step = tr.global_step
        if step > cfg.td3.learning_starts and len(tr.buffer) >= cfg.td3.batch_size:
            for _ in range(cfg.td3.updates_per_step):
                td3_update(tr, tr.buffer.sample(tr.rng, cfg.td3.batch_size))
        if step % tcfg.eval_every == 0:
            raw = float(np.mean(evaluate(tr, step)))
            smoothed = raw if smoothed is None else tcfg.smoothing * smoothed + (1 - tcfg.smoothing) * raw
            curve.append((step, raw, smoothed))
            with open(outdir / "curve.csv", "a") as fh:
                fh.write(f"{step},{raw!r},{smoothed!r}\n")
            if progress:
                progress(f"step {step}: eval return {raw:.2f} (smoothed {smoothed:.2f})")
        if step in milestones and step != 0:
            save_policy(milestones[step], tr.actor, {"global_step": step})

    def save_resume_state() -> None:
        trainer.save(outdir / "trainer.ckpt.tmp2")
        with open(outdir / "replay.pkl.tmp", "wb") as fh:
            pickle.dump(trainer.buffer, fh, protocol=pickle.HIGHEST_PROTOCOL)
        os.replace(outdir / "trainer.ckpt.tmp2", outdir / "trainer.ckpt")
        os.replace(outdir / "replay.pkl.tmp", outdir / "replay.pkl")

    while trainer.global_step < tcfg.total_steps:
        n = sample_vehicle_count(schedule, trainer.global_step, trainer.env_rng)
        episode_loop(trainer, n, trainer.env_rng, explore=True, store=True, on_step=on_step,
                     max_steps=tcfg.total_steps - trainer.global_step)
        trainer.episodes += 1
        if trainer.global_step >= next_resume_save:
            save_resume_state()
            next_resume_save = (trainer.global_step // tcfg.checkpoint_every + 1) * tcfg.checkpoint_every
        if stop_at_step is not None and trainer.global_step >= stop_at_step:
            save_resume_state()
            return TrainingRun(outdir, trainer, curve, milestones)
    save_resume_state()
    save_policy(outdir / "policy_final.ckpt", trainer.actor, {"global_step": trainer.global_step})
    return TrainingRun(outdir, trainer, curve, milestones)
