"""Command-line entry point: `uam-arrival <command> ...`.

Exit codes: 0 success, 1 unexpected error, 2 bad command-line usage,
3 unreadable/unwritable files, 4 incompatible checkpoint version,
5 invalid configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import checkpoint as ckpt
from .config import Config, ConfigError, load_config

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_IO, EXIT_VERSION, EXIT_CONFIG = 0, 1, 2, 3, 4, 5

log = logging.getLogger("uam_arrival")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file (unknown keys are rejected)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value; repeatable")
    p.add_argument("--seed", type=int, help="random seed (overrides training.seed)")


def _add_policy(p: argparse.ArgumentParser) -> None:
    p.add_argument("--checkpoint", required=True, help="policy or trainer checkpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uam-arrival",
                                     description="Multi-agent eVTOL arrival training and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the shared LSTM-TD3 policy")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, help="total environment steps (overrides training.total_steps)")
    p.add_argument("--resume", action="store_true", help="continue from OUT/trainer.ckpt")
    p.add_argument("--no-curriculum", action="store_true", help="fixed vehicle count instead of phases")

    p = sub.add_parser("evaluate", help="exploration-free N-vehicle training-style episodes")
    _add_common(p)
    _add_policy(p)
    p.add_argument("--n", type=int, default=5, help="vehicles per episode")
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--out", help="write returns as JSON here")

    p = sub.add_parser("scenario", help="three-wave scripted scenario")
    _add_common(p)
    _add_policy(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", action="store_true", help="also render trajectories.svg")

    for name, helptext in (("study", "randomized stream study"),
                           ("noise-study", "stream study for several position-noise levels")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_policy(p)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--n", type=_int_list, help="comma-separated vehicle counts")
        p.add_argument("--reps", type=int, help="repetitions per vehicle count")
        p.add_argument("--entrance-check", action="store_true", help="defer/reroute arrivals near busy gates")
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        p.add_argument("--kde", action="store_true", help="export spatial densities per N")
        if name == "study":
            p.add_argument("--noise-sigma", type=float, default=0.0, help="position noise std [m]")
        else:
            p.add_argument("--noise-sigmas", type=_float_list, help="comma-separated noise stds [m]")

    p = sub.add_parser("poisson", help="clustered Poisson arrivals through the south gate")
    _add_common(p)
    _add_policy(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--entrance-check", action="store_true")
    p.add_argument("--noise-sigma", type=float, default=0.0)

    p = sub.add_parser("render", help="trajectory CSV to SVG")
    p.add_argument("trajectory", help="CSV written by scenario/poisson")
    p.add_argument("--out", required=True, help="SVG file")
    p.add_argument("--marker-interval", type=float, default=20.0, help="seconds between triangles")
    p.add_argument("--frames", help="directory for per-frame SVGs")
    p.add_argument("--frame-every", type=float, default=1.0)

    p = sub.add_parser("config", help="print the effective configuration")
    _add_common(p)
    return parser


def _config(args) -> Config:
    overrides = list(args.overrides)
    if getattr(args, "seed", None) is not None:
        overrides.append(f"training.seed={args.seed}")
    if getattr(args, "steps", None) is not None:
        overrides.append(f"training.total_steps={args.steps}")
    if getattr(args, "no_curriculum", False):
        overrides.append("curriculum.enabled=false")
    return load_config(args.config, overrides)


def _policy(path):
    from .evaluation import ActorPolicy
    from .training import load_actor
    return ActorPolicy(load_actor(path))


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_train(args) -> int:
    from .training import run_training
    cfg = _config(args)
    run = run_training(cfg, args.out, resume=args.resume, progress=lambda m: log.info(m))
    print(f"trained {run.trainer.global_step} steps, {len(run.curve)} evaluations -> {run.outdir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .training import Trainer, episode_loop, load_actor
    cfg = _config(args)
    trainer = Trainer(cfg)
    trainer.actor = load_actor(args.checkpoint)
    rng = np.random.default_rng([cfg.training.seed, 31337])
    returns = [episode_loop(trainer, args.n, rng, explore=False, store=False).episode_return
               for _ in range(args.episodes)]
    doc = {"n": args.n, "episodes": args.episodes, "returns": returns,
           "mean_return": float(np.mean(returns))}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _write_run(out: Path, result, cfg: Config, svg: bool) -> None:
    from .evaluation import render_trajectories_svg, write_trajectory_csv
    write_trajectory_csv(out / "trajectories.csv", result.trajectory)
    m = result.metrics
    doc = {**m.summary(),
           "min_distance_per_vehicle": {str(k): v for k, v in sorted(m.min_distances().items())},
           "per_vehicle": {str(k): {"spawn": s, "signal": g, "landing": la}
                           for k, (s, g, la) in sorted(m.per_vehicle.items())}}
    (out / "metrics.json").write_text(json.dumps(doc, indent=2) + "\n")
    with open(out / "min_distances.csv", "w") as fh:
        fh.write("vehicle_id,time_s,min_distance_m\n")
        for vid in sorted(m.min_pairwise_distance_series):
            for t, d in m.min_pairwise_distance_series[vid]:
                fh.write(f"{vid},{t!r},{d!r}\n")
    if svg:
        (out / "trajectories.svg").write_text(
            render_trajectories_svg(result.trajectory, marker_interval=cfg.evaluation.marker_interval))


def cmd_scenario(args) -> int:
    from .evaluation import run_wave_scenario
    cfg = _config(args)
    e = cfg.evaluation
    res = run_wave_scenario(_policy(args.checkpoint), n_waves=e.wave_count, gap=e.wave_gap,
                            speed=e.wave_speed, config=cfg.airspace.build(), max_time=e.max_time)
    out = _outdir(args.out)
    _write_run(out, res, cfg, args.svg)
    print(json.dumps(res.metrics.summary()))
    return EXIT_OK


def _study(args, cfg: Config, sigma: float, out: Path, tag: str) -> None:
    from .evaluation import GridSpec, run_simulation_study, spatial_kde, write_kde_csv
    from .training import load_actor
    e = cfg.evaluation
    res = run_simulation_study(load_actor(args.checkpoint), args.n or e.n_set, args.reps or e.reps,
                               entrance_check=args.entrance_check, noise_sigma=sigma,
                               seed=cfg.training.seed, gap=e.stream_gap, max_time=e.max_time,
                               workers=args.workers)
    (out / f"{tag}.json").write_text(res.to_json() + "\n")
    (out / f"{tag}.txt").write_text(res.to_text())
    print(res.to_text(), end="")
    if args.kde:
        for n in res.n_set:
            kde = spatial_kde(res.positions_for(n), GridSpec(e.kde_extent, e.kde_cells))
            write_kde_csv(out / f"{tag}_kde_N{n}.csv", kde)


def cmd_study(args) -> int:
    cfg = _config(args)
    if args.reps is not None and args.reps < 1:
        raise UsageError("--reps must be at least 1")
    out = _outdir(args.out)
    if args.command == "study":
        if args.noise_sigma < 0:
            raise UsageError("--noise-sigma must be non-negative")
        _study(args, cfg, args.noise_sigma, out, "study")
    else:
        for sigma in args.noise_sigmas or cfg.evaluation.noise_sigmas:
            if sigma < 0:
                raise UsageError("noise levels must be non-negative")
            print(f"# sigma_n = {sigma:g} m")
            _study(args, cfg, sigma, out, f"study_sigma{sigma:g}")
    return EXIT_OK


def cmd_poisson(args) -> int:
    from .environment import dump_schedule
    from .evaluation import run_poisson_scenario
    cfg = _config(args)
    e = cfg.evaluation
    schedule, res = run_poisson_scenario(
        _policy(args.checkpoint), cfg.training.seed, n_clusters=e.poisson_clusters,
        cluster_gap=e.poisson_cluster_gap, lam=e.poisson_lambda, intra_gap=e.poisson_intra_gap,
        entrance_check=args.entrance_check, noise_sigma=args.noise_sigma,
        config=cfg.airspace.build(), max_time=e.max_time)
    out = _outdir(args.out)
    (out / "schedule.txt").write_text(dump_schedule(schedule))
    _write_run(out, res, cfg, svg=False)
    print(json.dumps(res.metrics.summary()))
    return EXIT_OK


def cmd_render(args) -> int:
    from .evaluation import read_trajectory_csv, render_frames, render_trajectories_svg
    rows = read_trajectory_csv(args.trajectory)
    Path(args.out).write_text(render_trajectories_svg(rows, marker_interval=args.marker_interval))
    if args.frames:
        render_frames(rows, args.frames, every=args.frame_every)
    return EXIT_OK


def cmd_config(args) -> int:
    print(_config(args).dumps(), end="")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "scenario": cmd_scenario,
            "study": cmd_study, "noise-study": cmd_study, "poisson": cmd_poisson,
            "render": cmd_render, "config": cmd_config}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:       # argparse already printed the diagnostic
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ckpt.CheckpointVersionError as exc:
        print(f"checkpoint version error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except (OSError, ckpt.CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
