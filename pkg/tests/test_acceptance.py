"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion.

Criteria 7-10 need trained policies. Their inputs are produced by
`uam-arrival train` and scripts/acceptance_studies.py and stored under
artifacts/; a criterion whose inputs are missing or whose result falls short
is reported as FAIL. Where the shortfall stems from an unavailable training
budget (no full-length policy) the test is marked xfail with the reason,
rather than passing.
"""
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from oracles import (brute_force_cpa, finite_difference_check, random_batch,
                     reward_collision_oracle, standard_normal_density_2d)
from uam_arrival.config import load_config
from uam_arrival.environment import generate_poisson_schedule, generate_stream_schedule
from uam_arrival.evaluation import (GridSpec, NoiseModel, ScriptedPolicy, run_schedule, spatial_kde)
from uam_arrival.evaluation.metrics import spearman_rho
from uam_arrival.geometry import Vec2, cpa, heading_vector, wrap_angle
from uam_arrival.neural import Network
from uam_arrival.reward import collision_reward, collision_tail
from uam_arrival.training import (CurriculumSchedule, Trainer, episode_loop, read_curve,
                                  sample_vehicle_count)

ROOT = Path(__file__).resolve().parents[1]
ARTIFACTS = Path(os.environ.get("UAM_ARTIFACTS", ROOT / "artifacts"))
DESK = ARTIFACTS / "desk_run"
FULL = ARTIFACTS / "full_run"


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _best_policy():
    """(label, checkpoint path, acceptance-output dir) of the longest-trained policy available."""
    for label, d in (("full 2e6-step run", FULL), ("desk 2e5-step run", DESK)):
        if (d / "policy_final.ckpt").exists():
            return label, d / "policy_final.ckpt", d / "acceptance"
    return None, None, None


def _study(dirpath, name, ckpt_path):
    p = Path(dirpath) / f"{name}.json"
    if not p.exists():
        return None, f"missing {p.relative_to(ROOT) if p.is_relative_to(ROOT) else p}"
    doc = json.loads(p.read_text())
    if doc.get("checkpoint_sha256") != _sha(ckpt_path):
        return None, f"{p.name} was computed from a different checkpoint"
    return doc, ""


def test_c01_reward_anchors(criterion_report):
    tail100 = collision_tail(100.0)
    tail500 = collision_tail(500.0)
    branch = [collision_reward(d) for d in (0.0, 37.5, 100.0)]
    oracle_ok = all(abs(collision_reward(d) - reward_collision_oracle(d)) < 1e-12
                    for d in np.linspace(0, 1500, 301))
    ok = (abs(tail100 + 5.0) < 1e-9 and abs(tail500 + 0.0100) <= 1e-3
          and branch == [-10.0] * 3 and oracle_ok)
    criterion_report(1, "reward anchors", ok,
                     f"tail(100)={tail100:.12f}, tail(500)={tail500:.5f}, branch={branch}")
    assert ok


def test_c02_angle_transform(criterion_report):
    rng = np.random.default_rng(2024)
    n = 1_000_000
    theta = rng.uniform(-100, 100, n)
    k = rng.integers(-5, 6, n)
    w = wrap_angle(theta)
    w_shift = wrap_angle(theta + 2 * math.pi * k)
    in_range = (w >= -math.pi) & (w < math.pi) & (w_shift >= -math.pi) & (w_shift < math.pi)
    d = np.abs(w - w_shift)
    periodic = np.minimum(d, 2 * math.pi - d) <= 1e-9
    failures = int(np.sum(~in_range) + np.sum(~periodic))
    criterion_report(2, "angle transform", failures == 0, f"{2 * n} checks, {failures} failures")
    assert failures == 0


def test_c03_cpa_oracle(criterion_report):
    rng = np.random.default_rng(3)
    worst_d = worst_t = 0.0
    beyond = 0
    for _ in range(1000):
        p = rng.uniform(-1000, 1000, 2)
        hs = rng.uniform(-math.pi, math.pi, 2)
        sp = rng.uniform(10, 16, 2)
        vo, vt = heading_vector(hs[0]).scale(sp[0]), heading_vector(hs[1]).scale(sp[1])
        d, t = cpa(Vec2(0, 0), vo, Vec2(*p), vt)
        rel = (vt.n - vo.n, vt.e - vo.e)
        bd, bt = brute_force_cpa(p, rel)
        if t > 500.0:
            # minimum lies beyond the oracle horizon: the oracle must sit on its boundary
            beyond += 1
            worst_t = max(worst_t, abs(bt - 500.0))
            worst_d = max(worst_d, max(0.0, d - bd))
            continue
        worst_d = max(worst_d, abs(d - bd))
        worst_t = max(worst_t, abs(t - bt))
    ok = worst_d <= 0.5 and worst_t <= 0.5
    criterion_report(3, "CPA vs brute force", ok,
                     f"max |dd|={worst_d:.4f} m, max |dt|={worst_t:.4f} s ({beyond} beyond 500 s horizon)")
    assert ok


def test_c04_gradients(criterion_report):
    rng = np.random.default_rng(4)
    nets = {"actor": Network.create("actor", rng), "critic1": Network.create("critic", rng),
            "critic2": Network.create("critic", rng)}
    batches = [[0, 0, 0], [3, 3, 3], [12, 12, 12], [0, 3, 12]]
    worst, where = 0.0, ""
    for counts in batches:
        batch = random_batch(rng, counts)
        for name, net in nets.items():
            action = rng.uniform(-1, 1, len(counts)) if net.kind == "critic" else None
            err, per = finite_difference_check(net, batch, action, per_array=25, rng=rng)
            if err > worst:
                arr = max(per, key=per.get)
                worst, where = err, f"{name}/{arr} counts={counts}"
    ok = worst < 1e-4
    criterion_report(4, "analytic vs finite-difference gradients", ok,
                     f"max relative error {worst:.2e} ({where}); 3 networks x {len(batches)} batches, "
                     "all parameter groups")
    assert ok


def test_c05_replay_composition(criterion_report):
    cfg = load_config(overrides=["training.seed=5"])
    trainer = Trainer(cfg)
    rng = np.random.default_rng(5)
    capped, splits = 0, []
    for _ in range(6):
        stats = episode_loop(trainer, int(rng.integers(3, 9)), rng, explore=True, store=False, collect=True)
        if stats.landed:
            continue
        capped += 1
        sig = [t.sigma for t in stats.transitions]
        splits.append((len(sig), sig.count(-1), sig.count(1)))
    ok = capped >= 3 and all(s == (250, 200, 50) for s in splits)
    criterion_report(5, "replay composition", ok, f"{capped} capped episodes, (stored, sigma-1, sigma+1) = {splits}")
    assert ok


def test_c06_curriculum_boundaries(criterion_report):
    sched = CurriculumSchedule()
    rng = np.random.default_rng(6)
    expected = {999_999: (3, 8), 1_000_000: (8, 15), 1_499_999: (8, 15), 1_500_000: (15, 25)}
    details, ok = [], True
    for step, (lo, hi) in expected.items():
        draws = np.array([sample_vehicle_count(sched, step, rng) for _ in range(10_000)])
        good = bool(np.all((draws >= lo) & (draws <= hi))) and set(draws) == set(range(lo, hi + 1))
        ok &= good
        details.append(f"{step}:[{draws.min()},{draws.max()}]")
    criterion_report(6, "curriculum boundaries", ok, ", ".join(details))
    assert ok


def test_c07_desk_learning(criterion_report):
    curve_path = DESK / "curve.csv"
    if not curve_path.exists():
        criterion_report(7, "desk-scale learning", False, f"no curve at {curve_path}")
        pytest.fail("desk-run curve missing")
    cfg = load_config(DESK / "config.yaml")
    rows = read_curve(curve_path)
    complete = (cfg.training.total_steps == 200_000 and rows and rows[-1][0] == 200_000
                and cfg.curriculum.boundaries[1] >= 200_000)
    sm = np.array([r[2] for r in rows])
    q = len(sm) // 4
    first, last = float(sm[:q].mean()), float(sm[-q:].mean())
    ok = bool(complete and last > first)
    criterion_report(7, "desk-scale learning", ok,
                     f"{len(rows)} evaluations to step {rows[-1][0]}, smoothed return first quartile "
                     f"{first:.1f} -> final quartile {last:.1f} (seed {cfg.training.seed})")
    assert ok


def test_c08_full_policy_safety(criterion_report):
    ckpt_path = FULL / "policy_final.ckpt"
    if not ckpt_path.exists():
        criterion_report(8, "full-policy safety", False,
                         "no 2e6-step policy available (full training run not performed within the "
                         "compute budget); see the desk-run diagnostics in the README")
        pytest.xfail("requires a full 2e6-step training run")
    acc = FULL / "acceptance"
    wave, why1 = _study(acc, "wave", ckpt_path)
    ent, why2 = _study(acc, "entrance", ckpt_path)
    if wave is None or ent is None:
        criterion_report(8, "full-policy safety", False, why1 or why2)
        pytest.fail(why1 or why2)
    min_d = min(wave["min_distance_per_vehicle"].values())
    rows = {r["N"]: r for r in ent["rows"]}
    acc_total = sum(r["accidents_total"] for r in rows.values())
    t5 = rows[5]["airspace_time_mean"]
    ok = (wave["accidents"] == 0 and wave["incidents"] == 0 and min_d > 300.0 and acc_total == 0
          and 180.0 <= t5 <= 280.0 and not wave["timed_out"])
    criterion_report(8, "full-policy safety", ok,
                     f"wave accidents={wave['accidents']} incidents={wave['incidents']} min d={min_d:.1f} m; "
                     f"N=5,10 entrance-check accidents={acc_total}; N=5 airspace time={t5:.1f} s")
    assert ok


def _policy_criterion(number, title, evaluate):
    label, ckpt_path, acc = _best_policy()
    if label is None:
        return False, "no trained policy available", None
    ok, detail = evaluate(ckpt_path, acc)
    return ok, f"[{label}] {detail}", label


def test_c09_monotonic_congestion(criterion_report):
    def evaluate(ckpt_path, acc):
        doc, why = _study(acc, "congestion", ckpt_path)
        if doc is None:
            return False, why
        rows = sorted(doc["rows"], key=lambda r: r["N"])
        ns = [r["N"] for r in rows]
        means = [r["time_to_signal_mean"] for r in rows]
        if ns != [5, 10, 15, 20, 25, 30]:
            return False, f"incomplete study N={ns}"
        if any(math.isnan(m) for m in means):
            undefined = [n for n, m in zip(ns, means) if math.isnan(m)]
            return False, (f"time-to-signal undefined (no vehicle landed) for N={undefined}; "
                           f"timed-out runs={sum(r['timed_out'] for r in rows)}/{sum(r['runs'] for r in rows)}")
        rho = spearman_rho(ns, means)
        strict = all(b > a for a, b in zip(means, means[1:]))
        timeouts = sum(r["timed_out"] for r in rows)
        return strict and rho == 1.0, (f"time-to-signal means {[round(m, 1) for m in means]} s, "
                                       f"Spearman rho={rho:.3f}, timed-out runs={timeouts}")
    ok, detail, label = _policy_criterion(9, "monotonic congestion", evaluate)
    criterion_report(9, "monotonic congestion", ok, detail)
    if not ok and label != "full 2e6-step run":
        pytest.xfail("evaluated with a desk-scale policy; the criterion targets the full-run policy")
    assert ok


def test_c10_noise_robustness(criterion_report):
    # part 1: noise isolation with a scripted action sequence (policy independent)
    def scripted(vid, t):
        return math.sin(0.07 * t + 0.9 * vid) * (1 if vid % 2 else -1)
    sched = generate_stream_schedule(10, np.random.default_rng(10))
    clean = run_schedule(ScriptedPolicy(scripted), sched, max_time=900)
    identical = True
    for sigma in (10.0, 20.0, 100.0):
        noisy = run_schedule(ScriptedPolicy(scripted), sched, noise=NoiseModel(sigma),
                             noise_rng=np.random.default_rng(int(sigma)), max_time=900)
        # vehicles fly the same actions; landings depend on the (noisy) priority, so compare
        # each vehicle's path up to the earlier of its two landing times
        for vid in {r[1] for r in clean.trajectory}:
            a = [r[:6] for r in clean.trajectory if r[1] == vid]
            b = [r[:6] for r in noisy.trajectory if r[1] == vid]
            m = min(len(a), len(b))
            identical &= a[:m] == b[:m] and m > 0
    def evaluate(ckpt_path, acc):
        doc, why = _study(acc, "noise", ckpt_path)
        if doc is None:
            return False, why
        row = doc["rows"][0]
        ok = (doc["study"]["noise_sigma"] == 10.0 and doc["study"]["entrance_check"]
              and row["N"] == 10 and row["runs"] == 30 and row["accidents_total"] == 0)
        return ok, (f"N=10, sigma=10 m, entrance check, {row['runs']} runs: accidents={row['accidents_total']}, "
                    f"incidents={row['incidents_total']}, timed-out={row['timed_out']}")
    ok_study, detail, label = _policy_criterion(10, "noise robustness", evaluate)
    ok = identical and ok_study
    criterion_report(10, "noise robustness", ok,
                     f"ground truth bit-identical under noise: {identical}; {detail}")
    assert identical
    if not ok_study and label != "full 2e6-step run":
        pytest.xfail("study evaluated with a desk-scale policy; the criterion targets the full-run policy")
    assert ok


def test_c11_poisson_moments(criterion_report):
    totals, gates = [], set()
    for seed in range(10_000):
        s = generate_poisson_schedule(np.random.default_rng(seed))
        totals.append(len(s))
        gates.update(a.gate for a in s)
    mean = float(np.mean(totals))
    ok = 19.5 <= mean <= 20.5 and gates <= {"S"}
    criterion_report(11, "Poisson generator moments", ok, f"mean arrivals {mean:.3f}, gates {sorted(gates)}")
    assert ok


def test_c12_kde(criterion_report):
    pts = np.random.default_rng(12).standard_normal((10_000, 2))
    k = spatial_kde(pts, GridSpec(extent=5.0, cells=200))
    i, j = np.unravel_index(np.argmax(k.density), k.density.shape)
    peak = standard_normal_density_2d(0.0, 0.0)
    peak_err = abs(k.density[i, j] - peak) / peak
    at_origin = abs(k.n_axis[i]) < 0.3 and abs(k.e_axis[j]) < 0.3
    mass = k.mass()
    ok = peak_err < 0.10 and at_origin and abs(mass - 1.0) < 1e-2 and bool(np.all(k.density >= 0))
    criterion_report(12, "KDE correctness", ok,
                     f"peak {k.density[i, j]:.4f} vs {peak:.4f} ({100 * peak_err:.1f}%) at "
                     f"({k.n_axis[i]:.2f}, {k.e_axis[j]:.2f}); grid mass {mass:.5f}")
    assert ok
