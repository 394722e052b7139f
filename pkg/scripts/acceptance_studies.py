#!/usr/bin/env python3
"""Policy-dependent evaluation runs consumed by tests/test_acceptance.py.

    python scripts/acceptance_studies.py --checkpoint artifacts/desk_run/policy_final.ckpt \
        --out artifacts/desk_run/acceptance [--workers 1] [--only wave,entrance,congestion,noise]

Each output JSON records the SHA-256 of the checkpoint it was computed from,
so stale results are detected by the tests.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from uam_arrival.evaluation import ActorPolicy, run_simulation_study, run_wave_scenario
from uam_arrival.training import load_actor

STUDIES = {
    # name: (n_set, entrance_check, noise_sigma)
    "entrance": ([5, 10], True, 0.0),
    "congestion": ([5, 10, 15, 20, 25, 30], False, 0.0),
    "noise": ([10], True, 10.0),
}


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-time", type=float, default=3600.0)
    p.add_argument("--only", default="wave," + ",".join(STUDIES))
    args = p.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = sha256(args.checkpoint)
    actor = load_actor(args.checkpoint)
    wanted = [w.strip() for w in args.only.split(",") if w.strip()]

    if "wave" in wanted:
        t0 = time.time()
        res = run_wave_scenario(ActorPolicy(actor), max_time=args.max_time)
        doc = {"checkpoint_sha256": digest, **res.metrics.summary(),
               "min_distance_per_vehicle": {str(k): v for k, v in sorted(res.metrics.min_distances().items())}}
        (out / "wave.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wave done in {time.time() - t0:.0f}s: {res.metrics.summary()}", flush=True)

    for name in wanted:
        if name not in STUDIES:
            continue
        n_set, check, sigma = STUDIES[name]
        t0 = time.time()
        res = run_simulation_study(actor, n_set, args.reps, entrance_check=check, noise_sigma=sigma,
                                   seed=args.seed, max_time=args.max_time, workers=args.workers,
                                   position_every=None)
        doc = json.loads(res.to_json())
        doc["checkpoint_sha256"] = digest
        (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        (out / f"{name}.txt").write_text(res.to_text())
        print(f"{name} done in {time.time() - t0:.0f}s", flush=True)
        print(res.to_text(), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
