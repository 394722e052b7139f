"""Fused elementwise loops for the masked LSTM and the Adam update.

Gate layout along the last axis is [input, forget, cell, output], each
`H` wide. Matrix products stay in numpy; only elementwise work lives here.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def lstm_gates(s, c, gates, c_new):
    """Gates from s = tanh(pre-activation * [.5, .5, 1, .5]) and the new cell state.

    s, gates: (L, B, 4H); c, c_new: (L, B, H).
    """
    L, B, H = c.shape
    for l in range(L):
        for b in range(B):
            for j in range(H):
                i = 0.5 + 0.5 * s[l, b, j]
                f = 0.5 + 0.5 * s[l, b, H + j]
                g = s[l, b, 2 * H + j]
                o = 0.5 + 0.5 * s[l, b, 3 * H + j]
                gates[l, b, j] = i
                gates[l, b, H + j] = f
                gates[l, b, 2 * H + j] = g
                gates[l, b, 3 * H + j] = o
                c_new[l, b, j] = f * c[l, b, j] + i * g


@njit(cache=True)
def lstm_commit(mask, gates, tc, c_new, h, c):
    """Masked in-place update h = o * tanh(c_new), c = c_new where mask is set."""
    L, B, H = c.shape
    for l in range(L):
        for b in range(B):
            if mask[l, b] != 0.0:
                for j in range(H):
                    c[l, b, j] = c_new[l, b, j]
                    h[l, b, j] = gates[l, b, 3 * H + j] * tc[l, b, j]


@njit(cache=True)
def lstm_step_backward(d_h, d_c, mask, gates, tc_new, c_prev, da):
    """Pre-activation gradients `da` for one masked step.

    On return d_c holds the gradient w.r.t. the previous cell state and
    d_h holds only the part of the previous hidden gradient that bypasses
    the cell (masked steps); the caller adds da @ Wh.T.
    """
    L, B, H = d_h.shape
    for l in range(L):
        for b in range(B):
            if mask[l, b] == 0.0:
                for j in range(4 * H):
                    da[l, b, j] = 0.0
                continue
            for j in range(H):
                i = gates[l, b, j]
                f = gates[l, b, H + j]
                g = gates[l, b, 2 * H + j]
                o = gates[l, b, 3 * H + j]
                tc = tc_new[l, b, j]
                dh = d_h[l, b, j]
                dcn = d_c[l, b, j] + dh * o * (1.0 - tc * tc)
                da[l, b, j] = dcn * g * i * (1.0 - i)
                da[l, b, H + j] = dcn * c_prev[l, b, j] * f * (1.0 - f)
                da[l, b, 2 * H + j] = dcn * i * (1.0 - g * g)
                da[l, b, 3 * H + j] = dh * tc * o * (1.0 - o)
                d_c[l, b, j] = dcn * f
                d_h[l, b, j] = 0.0


@njit(cache=True)
def adam_update(p, g, m, v, lr, b1, b2, corr1, corr2, eps):
    pf = p.reshape(-1)
    gf = g.reshape(-1)
    mf = m.reshape(-1)
    vf = v.reshape(-1)
    for k in range(pf.size):
        gk = gf[k]
        mk = b1 * mf[k] + (1.0 - b1) * gk
        vk = b2 * vf[k] + (1.0 - b2) * gk * gk
        mf[k] = mk
        vf[k] = vk
        pf[k] -= lr * (mk / corr1) / (math.sqrt(vk / corr2) + eps)


def warmup():
    """Compile the kernels once (cached on disk afterwards)."""
    z = np.zeros((1, 1, 1))
    g = np.zeros((1, 1, 4))
    m = np.ones((1, 1))
    lstm_gates(g.copy(), z.copy(), g.copy(), z.copy())
    lstm_commit(m, g.copy(), z.copy(), z.copy(), z.copy(), z.copy())
    lstm_step_backward(z.copy(), z.copy(), m, g.copy(), z.copy(), z.copy(), g.copy())
    adam_update(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 1e-3, 0.9, 0.999, 0.1, 0.001, 1e-8)
