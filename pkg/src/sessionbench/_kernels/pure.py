"""Pure numpy implementations of the hot kernels.

Shared kernel contract (mirrored by the compiled backend):

- lstm_forward(tokens, lengths, wx, wh, bias) -> (h, c, ig, fg, og, gg, tc)
  All outputs are (T, B, H) float64. h and c are post-mask states: steps at
  or beyond a sequence's length copy the previous state unchanged. Gate and
  tanh-cell slots of masked steps are zeroed.
- lstm_backward(tokens, lengths, input_dim, wh, h, c, ig, fg, og, gg, tc, d_h)
  -> (d_wx, d_wh, d_bias) for the loss whose gradient w.r.t. the post-mask
  hidden states is d_h (T, B, H). Masked steps contribute zero gradient.
- hvg_edges(values) -> (m, 2) int64 edge array of the horizontal visibility
  graph under the strict criterion (ties block visibility).
- window_codes(values) -> (n-3,) int64 bit codes of the three optional
  edges in each 4-point window: bit0=(0,2), bit1=(1,3), bit2=(0,3).

Token order within a gate block and the [input, forget, output, candidate]
gate layout are fixed; both backends must match bit-for-bit on integer
outputs and to rounding on floats.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(tokens, lengths, wx, wh, bias):
    B, T = tokens.shape
    H4, D = wx.shape
    H = H4 // 4
    wxT = np.ascontiguousarray(wx.T)
    whT = np.ascontiguousarray(wh.T)
    h = np.zeros((T, B, H))
    c = np.zeros((T, B, H))
    ig = np.zeros((T, B, H))
    fg = np.zeros((T, B, H))
    og = np.zeros((T, B, H))
    gg = np.zeros((T, B, H))
    tc = np.zeros((T, B, H))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        active = (t < lengths)[:, None]
        tok = np.where(t < lengths, tokens[:, t], 0)
        z = wxT[tok] + h_prev @ whT + bias
        i_t = _sigmoid(z[:, :H])
        f_t = _sigmoid(z[:, H : 2 * H])
        o_t = _sigmoid(z[:, 2 * H : 3 * H])
        g_t = np.tanh(z[:, 3 * H :])
        c_new = f_t * c_prev + i_t * g_t
        tc_t = np.tanh(c_new)
        h_new = o_t * tc_t
        h[t] = np.where(active, h_new, h_prev)
        c[t] = np.where(active, c_new, c_prev)
        ig[t] = np.where(active, i_t, 0.0)
        fg[t] = np.where(active, f_t, 0.0)
        og[t] = np.where(active, o_t, 0.0)
        gg[t] = np.where(active, g_t, 0.0)
        tc[t] = np.where(active, tc_t, 0.0)
        h_prev = h[t]
        c_prev = c[t]
    return h, c, ig, fg, og, gg, tc


def lstm_backward(tokens, lengths, input_dim, wh, h, c, ig, fg, og, gg, tc, d_h):
    T, B, H = h.shape
    H4 = 4 * H
    zeros = np.zeros((B, H))
    d_wxT = np.zeros((input_dim, H4))
    d_wh = np.zeros((H4, H))
    d_bias = np.zeros(H4)
    dh_carry = np.zeros((B, H))
    dc_carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        active = (t < lengths)[:, None]
        dh_tot = d_h[t] + dh_carry
        d_o = tc[t] * dh_tot
        dc_new = og[t] * (1.0 - tc[t] ** 2) * dh_tot + dc_carry
        c_prev = c[t - 1] if t > 0 else zeros
        h_prev = h[t - 1] if t > 0 else zeros
        d_i = gg[t] * dc_new
        d_f = c_prev * dc_new
        d_g = ig[t] * dc_new
        dz = np.concatenate(
            [
                ig[t] * (1.0 - ig[t]) * d_i,
                fg[t] * (1.0 - fg[t]) * d_f,
                og[t] * (1.0 - og[t]) * d_o,
                (1.0 - gg[t] ** 2) * d_g,
            ],
            axis=1,
        )
        dz = np.where(active, dz, 0.0)
        dc_carry = np.where(active, fg[t] * dc_new, dc_carry)
        dh_carry = dz @ wh + np.where(active, 0.0, dh_tot)
        d_bias += dz.sum(axis=0)
        if t > 0:
            d_wh += dz.T @ h_prev
        tok = np.where(t < lengths, tokens[:, t], 0)
        np.add.at(d_wxT, tok, dz)
    return np.ascontiguousarray(d_wxT.T), d_wh, d_bias


def hvg_edges(values):
    """Horizontal visibility edges via a single-pass monotone stack.

    Strict criterion: (i, j) is an edge iff every intermediate value is
    strictly below both endpoints. An element equal to the incoming value
    is linked and then popped: ties block visibility past themselves.
    """
    values = np.asarray(values)
    n = len(values)
    edges: list[tuple[int, int]] = []
    stack: list[int] = []
    for j in range(n):
        vj = values[j]
        while stack and values[stack[-1]] < vj:
            edges.append((stack.pop(), j))
        if stack:
            edges.append((stack[-1], j))
            if values[stack[-1]] == vj:
                stack.pop()
        stack.append(j)
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def window_codes(values):
    """Bit code of the optional edges in every 4 consecutive points."""
    values = np.asarray(values)
    a = values[:-3]
    b = values[1:-2]
    c = values[2:-1]
    d = values[3:]
    e02 = (b < a) & (b < c)
    e13 = (c < b) & (c < d)
    e03 = (b < a) & (b < d) & (c < a) & (c < d)
    return (e02 * 1 + e13 * 2 + e03 * 4).astype(np.int64)
