#!/usr/bin/env python3
"""
Gated recurrent layer
=====================
GRU cell with an explicit backward pass.

Sequences are processed left to right as (steps, batch, dim) arrays with an
optional (steps, batch) 0/1 mask; a masked step carries the previous state
through unchanged, so the last row holds each sequence's final state.
Right-to-left layers are run on reversed inputs by the caller.

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    g = tanh(x Wh + (r * h) Uh + bh)
    h' = (1 - z) * h + z * g
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

Params = Dict[str, np.ndarray]

GATES = ('z', 'r', 'h')


def init_gru(rng: np.random.Generator, prefix: str, input_dim: int, hidden: int) -> Params:
    """Glorot-uniform input/recurrent weights, zero biases."""
    params = {}
    for gate in GATES:
        bound_w = np.sqrt(6.0 / (input_dim + hidden))
        bound_u = np.sqrt(6.0 / (2 * hidden))
        params[f'{prefix}.W{gate}'] = rng.uniform(-bound_w, bound_w, (input_dim, hidden))
        params[f'{prefix}.U{gate}'] = rng.uniform(-bound_u, bound_u, (hidden, hidden))
        params[f'{prefix}.b{gate}'] = np.zeros(hidden)
    return params


def gru_forward(params: Params, prefix: str, X: np.ndarray,
                mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, list]:
    """
    Run the layer over X (steps x batch x dim).

    Returns the states (steps x batch x hidden) and the cache for
    gru_backward.
    """
    Wz, Uz, bz = params[f'{prefix}.Wz'], params[f'{prefix}.Uz'], params[f'{prefix}.bz']
    Wr, Ur, br = params[f'{prefix}.Wr'], params[f'{prefix}.Ur'], params[f'{prefix}.br']
    Wh, Uh, bh = params[f'{prefix}.Wh'], params[f'{prefix}.Uh'], params[f'{prefix}.bh']
    steps, batch, _ = X.shape
    hidden = bz.shape[0]
    H = np.zeros((steps, batch, hidden))
    h = np.zeros((batch, hidden))
    cache = []
    for t in range(steps):
        x = X[t]
        z = expit(x @ Wz + h @ Uz + bz)
        r = expit(x @ Wr + h @ Ur + br)
        g = np.tanh(x @ Wh + (r * h) @ Uh + bh)
        h_new = (1.0 - z) * h + z * g
        m = None
        if mask is not None:
            m = mask[t][:, None]
            h_new = m * h_new + (1.0 - m) * h
        cache.append((x, h, z, r, g, m))
        h = h_new
        H[t] = h
    return H, cache


def gru_backward(params: Params, prefix: str, dH: np.ndarray, cache: list,
                 grads: Params) -> np.ndarray:
    """
    Backpropagate dH (gradient w.r.t. every returned state) through the layer.

    Parameter gradients are accumulated into grads; returns dX.
    """
    Uz, Ur, Uh = params[f'{prefix}.Uz'], params[f'{prefix}.Ur'], params[f'{prefix}.Uh']
    Wz, Wr, Wh = params[f'{prefix}.Wz'], params[f'{prefix}.Wr'], params[f'{prefix}.Wh']
    steps = len(cache)
    dX = np.zeros((steps,) + cache[0][0].shape) if steps else np.zeros((0, 0, 0))
    carry = np.zeros_like(dH[0]) if steps else None
    for t in range(steps - 1, -1, -1):
        x, h_prev, z, r, g, m = cache[t]
        dh = dH[t] + carry
        if m is not None:
            dh_prev = (1.0 - m) * dh
            dh = m * dh
        else:
            dh_prev = np.zeros_like(dh)

        dg = dh * z
        dz = dh * (g - h_prev)
        dh_prev += dh * (1.0 - z)

        da_h = dg * (1.0 - g * g)
        grads[f'{prefix}.Wh'] += x.T @ da_h
        grads[f'{prefix}.Uh'] += (r * h_prev).T @ da_h
        grads[f'{prefix}.bh'] += da_h.sum(axis=0)
        drh = da_h @ Uh.T
        dr = drh * h_prev
        dh_prev += drh * r

        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        grads[f'{prefix}.Wz'] += x.T @ da_z
        grads[f'{prefix}.Uz'] += h_prev.T @ da_z
        grads[f'{prefix}.bz'] += da_z.sum(axis=0)
        grads[f'{prefix}.Wr'] += x.T @ da_r
        grads[f'{prefix}.Ur'] += h_prev.T @ da_r
        grads[f'{prefix}.br'] += da_r.sum(axis=0)

        dX[t] = da_h @ Wh.T + da_z @ Wz.T + da_r @ Wr.T
        dh_prev += da_z @ Uz.T + da_r @ Ur.T
        carry = dh_prev
    return dX


def gru_param_names(prefix: str) -> List[str]:
    return [f'{prefix}.{kind}{gate}' for gate in GATES for kind in ('W', 'U', 'b')]
