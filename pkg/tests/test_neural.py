import numpy as np
import pytest

from oracles import finite_difference_check, random_batch
from uam_arrival import checkpoint as ckpt
from uam_arrival.geometry import Vec2, VehicleState
from uam_arrival.neural import (FORGET_BIAS, Adam, Network, actor_forward, collate, critic_forward,
                                gradient_step, init_parameters, parameter_groups, param_shapes)
from uam_arrival.observation import build_observation


@pytest.fixture(scope="module")
def nets():
    rng = np.random.default_rng(42)
    return Network.create("actor", rng), Network.create("critic", rng)


def test_zero_parameters_give_zero_output():
    rng = np.random.default_rng(0)
    batch = random_batch(rng, [0, 3, 7])
    for kind in ("actor", "critic"):
        params = {k: np.zeros(s) for k, s in param_shapes(kind).items()}
        out, _ = Network(kind, params).forward(batch, np.zeros(3) if kind == "critic" else None)
        np.testing.assert_array_equal(out, 0.0)


def test_empty_target_sequences(nets):
    actor, critic = nets
    batch = random_batch(np.random.default_rng(1), [0, 0])
    a, _ = actor.forward(batch)
    q, _ = critic.forward(batch, a)
    assert a.shape == (2,) and np.all(np.isfinite(q))


def test_actor_output_strictly_bounded(nets):
    actor, _ = nets
    big = {k: v * 50 for k, v in actor.params.items()}
    out, _ = Network("actor", big).forward(random_batch(np.random.default_rng(2), range(0, 31)))
    assert np.all(np.abs(out) <= 1.0)
    out, _ = actor.forward(random_batch(np.random.default_rng(2), range(0, 31)))
    assert np.all(np.abs(out) < 1.0)


def test_critic_finite_and_action_sensitive(nets):
    _, critic = nets
    rng = np.random.default_rng(3)
    batch = random_batch(rng, rng.integers(0, 15, 1000))
    q, _ = critic.forward(batch, rng.uniform(-1, 1, 1000))
    assert np.all(np.isfinite(q))
    one = random_batch(rng, [4])
    q1, _ = critic.forward(one, [-0.7])
    q2, _ = critic.forward(one, [0.6])
    assert q1[0] != q2[0]


def test_padding_does_not_change_output(nets):
    """A short sequence padded to a longer batch gives the same result as alone."""
    actor, _ = nets
    rng = np.random.default_rng(4)
    b = random_batch(rng, [3, 12])
    alone_own = b.own[:, :1]
    alone_tgt = b.tgt[:, :1, -3:]
    alone_mask = b.mask[:, :1, -3:]
    from uam_arrival.neural import Batch
    a_batch, _ = actor.forward(b)
    a_alone, _ = actor.forward(Batch(alone_own, alone_tgt, alone_mask))
    assert a_batch[0] == pytest.approx(a_alone[0], abs=1e-13)


def test_history_length_enforced(nets):
    actor, _ = nets
    with pytest.raises(ValueError):
        actor.forward(random_batch(np.random.default_rng(0), [2], history=2))


def test_wrapper_kind_checks(nets):
    actor, critic = nets
    b = random_batch(np.random.default_rng(0), [2])
    with pytest.raises(ValueError):
        actor_forward(critic, b)
    with pytest.raises(ValueError):
        critic_forward(actor, b, [0.0])
    with pytest.raises(ValueError):
        critic.forward(b)


def test_collate_from_observations(nets):
    actor, _ = nets
    vs = [VehicleState(i, Vec2(300 + 50 * i, 100 * i), 0.1 * i, 12.0) for i in range(4)]
    obs = [build_observation(v, [o for o in vs if o.id != v.id]) for v in vs]
    batch = collate([[o, o, o] for o in obs])
    assert batch.tgt.shape == (3, 4, 3, 6) and batch.mask.sum() == 3 * 4 * 3
    single = actor_forward(actor, [[obs[0]] * 3])[0]
    assert single[0] == pytest.approx(actor.forward(batch)[0][0], abs=1e-13)


def test_zero_upstream_zero_gradients(nets):
    _, critic = nets
    b = random_batch(np.random.default_rng(5), [0, 3, 12])
    q, cache = critic.forward(b, [0.1, -0.2, 0.3])
    grads, d_a = critic.backward(cache, np.zeros(3))
    assert all(not np.any(g) for g in grads.values()) and not np.any(d_a)


@pytest.mark.parametrize("counts", [[0, 0, 0], [3, 3, 3], [0, 3, 12, 5]])
def test_gradients_match_finite_differences(nets, counts):
    actor, critic = nets
    rng = np.random.default_rng(sum(counts))
    batch = random_batch(rng, counts)
    err, _ = finite_difference_check(actor.copy(), batch, per_array=6, rng=rng)
    assert err < 1e-4
    err, per = finite_difference_check(critic.copy(), batch, rng.uniform(-1, 1, len(counts)),
                                       per_array=6, rng=rng)
    assert err < 1e-4, per


def test_gradients_deterministic(nets):
    actor, _ = nets
    b = random_batch(np.random.default_rng(6), [1, 5])
    g1 = actor.backward(actor.forward(b)[1], np.ones(2))[0]
    g2 = actor.backward(actor.forward(b)[1], np.ones(2))[0]
    for k in g1:
        np.testing.assert_array_equal(g1[k], g2[k])


class TestInit:
    def test_same_seed_identical(self):
        a = init_parameters("actor", np.random.default_rng(9))
        b = init_parameters("actor", np.random.default_rng(9))
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_bounds_and_forget_bias(self):
        p = init_parameters("critic", np.random.default_rng(9))
        H = p["enc.own.b"].shape[-1]
        assert np.abs(p["enc.own.W"]).max() <= 1 / np.sqrt(3)
        assert np.abs(p["enc.lstm.Wh"]).max() <= 1 / np.sqrt(H)
        assert np.abs(p["head.W2"]).max() <= 3e-3
        assert p["enc.lstm.b"][..., H:2 * H].mean() == FORGET_BIAS == 1.0
        assert p["tmp.lstm.b"][H:2 * H].mean() == 1.0
        assert p["tmp.lstm.b"][:H].sum() == 0.0

    def test_groups_cover_all_parameters(self):
        for kind in ("actor", "critic"):
            groups = parameter_groups(kind)
            names = {n for members in groups.values() for n, _ in members}
            assert names == set(param_shapes(kind))
            assert len([g for g in groups if g.startswith("spatial")]) == 3

    def test_per_lag_encoders_independent(self):
        p = init_parameters("actor", np.random.default_rng(1))
        assert not np.array_equal(p["enc.tgt.W"][0], p["enc.tgt.W"][1])


class TestAdam:
    def test_zero_gradient_no_change(self):
        p = {"w": np.array([1.0, -2.0])}
        gradient_step(p, {"w": np.zeros(2)}, Adam(lr=0.1))
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])

    def test_descends_quadratic(self):
        p = {"w": np.array([1.0])}
        gradient_step(p, {"w": 2 * p["w"]}, Adam(lr=0.1))
        assert abs(p["w"][0]) < 1.0

    def test_first_step_magnitude(self):
        p = {"w": np.array([0.5, 0.5])}
        gradient_step(p, {"w": np.array([1.0, -1.0])}, Adam(lr=1e-3))
        np.testing.assert_allclose(p["w"], [0.5 - 1e-3, 0.5 + 1e-3], rtol=0, atol=1e-9)


def test_checkpoint_round_trip_bit_exact(tmp_path, nets):
    actor, _ = nets
    path = tmp_path / "a.ckpt"
    ckpt.save(path, {f"actor/{k}": v for k, v in actor.params.items()}, {"note": "x"})
    arrays, meta = ckpt.load(path)
    assert meta["note"] == "x"
    for k, v in actor.params.items():
        got = arrays[f"actor/{k}"]
        assert got.dtype == np.float64 and got.shape == v.shape
        assert got.tobytes() == v.tobytes()


def test_checkpoint_corruption_and_version(tmp_path):
    blob = bytearray(ckpt.encode({"x": np.arange(4.0)}, {}))
    blob[-6] ^= 0xFF
    with pytest.raises(ckpt.CheckpointError):
        ckpt.decode(bytes(blob))
    good = bytearray(ckpt.encode({"x": np.arange(4.0)}, {}))
    good[len(ckpt.MAGIC):len(ckpt.MAGIC) + 4] = (99).to_bytes(4, "little")
    with pytest.raises(ckpt.CheckpointVersionError):
        ckpt.decode(bytes(good))
    with pytest.raises(ckpt.CheckpointError):
        ckpt.decode(b"not a checkpoint")
