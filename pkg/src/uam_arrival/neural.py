"""Spatial-temporal recurrent actor and critics with hand-written gradients.

Every network has the same trunk:

    for each history slot k (oldest first), with its own parameters:
        own embedding     e_k = tanh(o_own @ W_own + b_own)
        target embedding  x_kj = tanh(o_tgt_j @ W_tgt + b_tgt)
        spatial LSTM over x_k1..x_kn (sorted targets), final hidden s_k
        z_k = [e_k, s_k]
    temporal LSTM over z_0..z_h, final hidden u

followed by a head:
    actor:  tanh(W2 tanh(W1 u + b1) + b2)            in (-1, 1)
    critic: W2 tanh(W1 [u, a] + b1) + b2              unbounded

Per-slot encoder parameters are stacked along a leading axis of size h+1
so one LSTM step handles all slots with a single batched matmul. Target
sequences are left-padded and masked: padded steps leave the state
untouched, so every sequence ends on the last step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as _k
from .observation import OWN_DIM, TARGET_DIM, Observation

HISTORY = 3   # h + 1 with h = 2
HIDDEN = 64
FORGET_BIAS = 1.0
FINAL_INIT = 3e-3

ENCODER_KEYS = ("enc.own.W", "enc.own.b", "enc.tgt.W", "enc.tgt.b",
                "enc.lstm.Wx", "enc.lstm.Wh", "enc.lstm.b")
TEMPORAL_KEYS = ("tmp.lstm.Wx", "tmp.lstm.Wh", "tmp.lstm.b")
HEAD_KEYS = ("head.W1", "head.b1", "head.W2", "head.b2")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


_GATE_SCALES: dict = {}


def _gate_scale(H: int) -> np.ndarray:
    """Pre-activation scale so one tanh yields all gates (sigmoid(x) = (1 + tanh(x/2)) / 2)."""
    if H not in _GATE_SCALES:
        s = np.full(4 * H, 0.5)
        s[2 * H:3 * H] = 1.0
        _GATE_SCALES[H] = s
    return _GATE_SCALES[H]


@dataclass
class Batch:
    own: np.ndarray     # (L, B, 3)
    tgt: np.ndarray     # (L, B, T, 6), left padded
    mask: np.ndarray    # (L, B, T) float, 1 for real targets

    @property
    def size(self) -> int:
        return self.own.shape[1]


def collate(histories: Sequence[Sequence[Observation]]) -> Batch:
    """Stack B histories of L observations into padded arrays."""
    if not histories:
        raise ValueError("empty batch")
    L = len(histories[0])
    if any(len(h) != L for h in histories):
        raise ValueError("histories differ in length")
    B = len(histories)
    T = max(o.n_targets for h in histories for o in h)
    own = np.empty((L, B, OWN_DIM))
    tgt = np.zeros((L, B, T, TARGET_DIM))
    mask = np.zeros((L, B, T))
    for b, hist in enumerate(histories):
        for k, obs in enumerate(hist):
            own[k, b] = obs.own
            n = obs.n_targets
            if n:
                tgt[k, b, T - n:] = obs.targets
                mask[k, b, T - n:] = 1.0
    return Batch(own, tgt, mask)


def _as_batch(x) -> Batch:
    if isinstance(x, Batch):
        return x
    x = list(x)
    if x and isinstance(x[0], Observation):
        return collate([x])
    return collate(x)


def param_shapes(kind: str, history: int = HISTORY, hidden: int = HIDDEN) -> dict:
    L, H = history, hidden
    head_in = H + 1 if kind == "critic" else H
    return {
        "enc.own.W": (L, OWN_DIM, H), "enc.own.b": (L, H),
        "enc.tgt.W": (L, TARGET_DIM, H), "enc.tgt.b": (L, H),
        "enc.lstm.Wx": (L, H, 4 * H), "enc.lstm.Wh": (L, H, 4 * H), "enc.lstm.b": (L, 4 * H),
        "tmp.lstm.Wx": (2 * H, 4 * H), "tmp.lstm.Wh": (H, 4 * H), "tmp.lstm.b": (4 * H,),
        "head.W1": (head_in, H), "head.b1": (H,),
        "head.W2": (H, 1), "head.b2": (1,),
    }


def parameter_groups(kind: str, history: int = HISTORY) -> dict:
    """Named groups: one spatial encoder per history slot, the temporal aggregator, the head.

    Values are lists of (array name, slot index or None).
    """
    groups = {f"spatial[{k}]": [(name, k) for name in ENCODER_KEYS] for k in range(history)}
    groups["temporal"] = [(name, None) for name in TEMPORAL_KEYS]
    groups["head"] = [(name, None) for name in HEAD_KEYS]
    return groups


def init_parameters(kind: str, rng: np.random.Generator, history: int = HISTORY,
                    hidden: int = HIDDEN) -> dict:
    """Fan-in scaled uniform weights, zero biases, LSTM forget-gate bias +1."""
    if kind not in ("actor", "critic"):
        raise ValueError(f"unknown network kind {kind!r}")
    H = hidden
    params = {}
    for name, shape in param_shapes(kind, history, hidden).items():
        if name.endswith(".b") or name in ("head.b1", "head.b2"):
            arr = np.zeros(shape)
            if "lstm" in name:
                arr[..., H:2 * H] = FORGET_BIAS
        elif name == "head.W2":
            arr = rng.uniform(-FINAL_INIT, FINAL_INIT, shape)
        else:
            fan_in = shape[-2]
            if name.endswith("Wx") or name.endswith("Wh"):
                fan_in = H
            lim = 1.0 / np.sqrt(fan_in)
            arr = rng.uniform(-lim, lim, shape)
        params[name] = arr
    return params


def zeros_like_params(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


class Network:
    """Actor or critic holding its parameter arrays."""

    def __init__(self, kind: str, params: dict):
        if kind not in ("actor", "critic"):
            raise ValueError(f"unknown network kind {kind!r}")
        expected = param_shapes(kind, params["enc.own.W"].shape[0], params["enc.own.b"].shape[-1])
        for name, shape in expected.items():
            if name not in params or params[name].shape != shape:
                raise ValueError(f"{kind} parameter {name} missing or mis-shaped")
        self.kind = kind
        self.params = params

    @classmethod
    def create(cls, kind: str, rng: np.random.Generator, **kw) -> "Network":
        return cls(kind, init_parameters(kind, rng, **kw))

    @property
    def history(self) -> int:
        return self.params["enc.own.W"].shape[0]

    @property
    def hidden(self) -> int:
        return self.params["enc.own.b"].shape[-1]

    def copy(self) -> "Network":
        return Network(self.kind, {k: v.copy() for k, v in self.params.items()})

    # forward

    def forward(self, batch, action: Optional[np.ndarray] = None):
        batch = _as_batch(batch)
        P, H = self.params, self.hidden
        L, B, T = batch.tgt.shape[0], batch.tgt.shape[1], batch.tgt.shape[2]
        if L != self.history:
            raise ValueError(f"history length {L} != {self.history}")
        if self.kind == "critic":
            if action is None:
                raise ValueError("critic needs an action")
            action = np.asarray(action, dtype=float).reshape(B)
        cache = {"B": B, "T": T, "batch": batch, "kind": self.kind}

        e_own = np.tanh(batch.own @ P["enc.own.W"] + P["enc.own.b"][:, None, :])
        x = np.tanh(batch.tgt.reshape(L, B * T, TARGET_DIM) @ P["enc.tgt.W"]
                    + P["enc.tgt.b"][:, None, :])                       # (L, B*T, H)
        xp = (x @ P["enc.lstm.Wx"] + P["enc.lstm.b"][:, None, :]).reshape(L, B, T, 4 * H)
        h = np.zeros((L, B, H))
        c = np.zeros((L, B, H))
        gates = np.empty((L, B, T, 4 * H))
        c_new_all = np.empty((L, B, T, H))
        tc_all = np.empty((L, B, T, H))
        h_prev_all = np.empty((L, B, T, H))
        c_prev_all = np.empty((L, B, T, H))
        Wh = P["enc.lstm.Wh"]
        mask = np.ascontiguousarray(batch.mask.transpose(2, 0, 1))     # (T, L, B)
        gate_scale = _gate_scale(H)
        for t in range(T):
            h_prev_all[:, :, t] = h
            c_prev_all[:, :, t] = c
            s = np.tanh((xp[:, :, t] + h @ Wh) * gate_scale)
            cn = c_new_all[:, :, t]
            _k.lstm_gates(s, c, gates[:, :, t], cn)
            tc = tc_all[:, :, t]
            np.tanh(cn, out=tc)
            _k.lstm_commit(mask[t], gates[:, :, t], tc, cn, h, c)
        z = np.concatenate([e_own, h], axis=-1)                         # (L, B, 2H)
        cache.update(e_own=e_own, x=x, gates=gates, tc=tc_all, h_prev=h_prev_all,
                     c_prev=c_prev_all, z=z)

        # temporal LSTM over slots, oldest first
        ht = np.zeros((B, H))
        ct = np.zeros((B, H))
        tcache = []
        for k in range(L):
            a = z[k] @ P["tmp.lstm.Wx"] + ht @ P["tmp.lstm.Wh"] + P["tmp.lstm.b"]
            i, f = _sigmoid(a[:, :H]), _sigmoid(a[:, H:2 * H])
            gg, o = np.tanh(a[:, 2 * H:3 * H]), _sigmoid(a[:, 3 * H:])
            cn = f * ct + i * gg
            tcache.append((ht, ct, i, f, gg, o, cn))
            ct = cn
            ht = o * np.tanh(cn)
        cache["tcache"] = tcache
        cache["u"] = ht

        if self.kind == "critic":
            head_in = np.concatenate([ht, action[:, None]], axis=1)
        else:
            head_in = ht
        v = np.tanh(head_in @ P["head.W1"] + P["head.b1"])
        out = v @ P["head.W2"] + P["head.b2"]
        if self.kind == "actor":
            out = np.tanh(out)
        cache.update(head_in=head_in, v=v, out=out)
        return out[:, 0], cache

    # backward

    def backward(self, cache: dict, upstream, need_params: bool = True):
        """Gradients of sum(upstream * output) w.r.t. every parameter.

        Returns (grads, d_action); d_action is None for the actor.
        With need_params=False only d_action is computed (critic only).
        """
        if cache.get("kind") != self.kind:
            raise ValueError("cache does not come from this network kind")
        P, H = self.params, self.hidden
        B, T, batch = cache["B"], cache["T"], cache["batch"]
        L = batch.own.shape[0]
        up = np.asarray(upstream, dtype=float).reshape(B, 1)
        if up.shape[0] != B:
            raise ValueError("upstream gradient does not match the cached batch")

        d_out = up * (1.0 - cache["out"] ** 2) if self.kind == "actor" else up
        v = cache["v"]
        grads = {}
        grads["head.W2"] = v.T @ d_out
        grads["head.b2"] = d_out.sum(axis=0)
        d_v = (d_out @ P["head.W2"].T) * (1.0 - v ** 2)
        grads["head.W1"] = cache["head_in"].T @ d_v
        grads["head.b1"] = d_v.sum(axis=0)
        d_in = d_v @ P["head.W1"].T
        d_action = None
        if self.kind == "critic":
            d_action = d_in[:, H].copy()
            if not need_params:
                return None, d_action
        d_h = d_in[:, :H]

        # temporal LSTM
        d_c = np.zeros((B, H))
        dWx = np.zeros_like(P["tmp.lstm.Wx"])
        dWh = np.zeros_like(P["tmp.lstm.Wh"])
        db = np.zeros_like(P["tmp.lstm.b"])
        z = cache["z"]
        d_z = np.empty_like(z)
        for k in reversed(range(L)):
            h_prev, c_prev, i, f, gg, o, cn = cache["tcache"][k]
            tc = np.tanh(cn)
            d_o = d_h * tc
            d_cn = d_c + d_h * o * (1.0 - tc ** 2)
            da = np.concatenate([
                d_cn * gg * i * (1.0 - i),
                d_cn * c_prev * f * (1.0 - f),
                d_cn * i * (1.0 - gg ** 2),
                d_o * o * (1.0 - o),
            ], axis=1)
            dWx += z[k].T @ da
            dWh += h_prev.T @ da
            db += da.sum(axis=0)
            d_z[k] = da @ P["tmp.lstm.Wx"].T
            d_h = da @ P["tmp.lstm.Wh"].T
            d_c = d_cn * f
        grads["tmp.lstm.Wx"], grads["tmp.lstm.Wh"], grads["tmp.lstm.b"] = dWx, dWh, db

        # own embedding
        e_own = cache["e_own"]
        d_eown = d_z[..., :H] * (1.0 - e_own ** 2)                       # (L, B, H)
        grads["enc.own.W"] = batch.own.transpose(0, 2, 1) @ d_eown
        grads["enc.own.b"] = d_eown.sum(axis=1)

        # spatial LSTM, masked BPTT
        gates, tc_all, c_prev_all = cache["gates"], cache["tc"], cache["c_prev"]
        d_h = d_z[..., H:].copy()
        d_c = np.zeros((L, B, H))
        d_a = np.empty((L, B, T, 4 * H))
        WhT = P["enc.lstm.Wh"].transpose(0, 2, 1)
        mask = np.ascontiguousarray(batch.mask.transpose(2, 0, 1))
        for t in reversed(range(T)):
            da = d_a[:, :, t]
            _k.lstm_step_backward(d_h, d_c, mask[t], gates[:, :, t], tc_all[:, :, t],
                                  c_prev_all[:, :, t], da)
            d_h += da @ WhT
        d_a2 = d_a.reshape(L, B * T, 4 * H)
        grads["enc.lstm.Wh"] = cache["h_prev"].reshape(L, B * T, H).transpose(0, 2, 1) @ d_a2
        x = cache["x"]
        grads["enc.lstm.Wx"] = x.transpose(0, 2, 1) @ d_a2
        grads["enc.lstm.b"] = d_a2.sum(axis=1)
        d_x = (d_a2 @ P["enc.lstm.Wx"].transpose(0, 2, 1)) * (1.0 - x ** 2)
        grads["enc.tgt.W"] = batch.tgt.reshape(L, B * T, TARGET_DIM).transpose(0, 2, 1) @ d_x
        grads["enc.tgt.b"] = d_x.sum(axis=1)
        return grads, d_action


def actor_forward(actor: Network, history):
    """Action(s) in (-1, 1) for one history (list of Observations) or a Batch."""
    if actor.kind != "actor":
        raise ValueError("actor_forward needs an actor network")
    return actor.forward(history)


def critic_forward(critic: Network, history, action):
    if critic.kind != "critic":
        raise ValueError("critic_forward needs a critic network")
    return critic.forward(history, action)


def backward(net: Network, cache: dict, upstream):
    return net.backward(cache, upstream)


class Adam:
    """Adaptive-moment optimizer with one moment pair per parameter array."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            _k.adam_update(params[name], np.ascontiguousarray(g), self.m[name], self.v[name],
                           self.lr, b1, b2, corr1, corr2, self.eps)

    def state_arrays(self, prefix: str) -> dict:
        out = {}
        for name in self.m:
            out[f"{prefix}.m.{name}"] = self.m[name]
            out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, prefix: str, arrays: dict, t: int) -> None:
        self.t = t
        self.m, self.v = {}, {}
        for key, arr in arrays.items():
            if key.startswith(prefix + ".m."):
                self.m[key[len(prefix) + 3:]] = arr.copy()
            elif key.startswith(prefix + ".v."):
                self.v[key[len(prefix) + 3:]] = arr.copy()


def gradient_step(params: dict, grads: dict, optimizer: Adam) -> dict:
    optimizer.step(params, grads)
    return params
