"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built, or when ``LOCA_PURE_PYTHON=1``.
Arrays are updated in place exactly as the compiled versions do.

Sparse model layout: row ``s * n_actions + a`` holds ``nnz[row]`` live
(successor, probability) pairs in ``succ[row, :nnz]`` / ``prob[row, :nnz]``.
Dead slots keep probability 0 and a valid index, so dense reductions over a
whole row are exact.
"""

from __future__ import annotations

import math

import numpy as np


def model_update(succ, prob, nnz, rhat, row, outcome, reward, alpha):
    n = int(nnz[row])
    live = succ[row, :n]
    hits = np.flatnonzero(live == outcome)
    if hits.size == 0 and n >= succ.shape[1]:
        return 0
    keep = 1.0 - alpha
    prob[row, :n] *= keep
    rhat[row] = keep * rhat[row] + alpha * reward
    if hits.size:
        prob[row, hits[-1]] += alpha
        return 1
    succ[row, n] = outcome
    prob[row, n] = alpha
    nnz[row] = n + 1
    return 2


def q_values(succ, prob, nnz, rhat, v, s, n_actions, discount, out):
    rows = slice(s * n_actions, (s + 1) * n_actions)
    out[:n_actions] = rhat[rows] + discount * (prob[rows] * v[succ[rows]]).sum(axis=1)


def value_iteration(succ, prob, nnz, rhat, v, n_states, n_actions, gamma, theta, max_sweeps, scratch):
    n_rows = n_states * n_actions
    succ, prob, rhat = succ[:n_rows], prob[:n_rows], rhat[:n_rows]
    delta = math.inf
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        q = rhat + gamma * (prob * v[succ]).sum(axis=1)
        new = q.reshape(n_states, n_actions).max(axis=1)
        delta = float(np.abs(new - v[:n_states]).max())
        v[:n_states] = new
        if delta < theta:
            break
    return sweep, delta


def build_predecessors(succ, nnz, n_states, n_actions, pred_ptr, pred_idx):
    rows = n_states * n_actions
    live = np.arange(succ.shape[1])[None, :] < nnz[:rows, None]
    targets = succ[:rows][live]
    sources = np.repeat(np.arange(n_states, dtype=np.int32), n_actions)
    sources = np.broadcast_to(sources[:, None], live.shape)[live]
    order = np.argsort(targets, kind="stable")
    pred_idx[:order.size] = sources[order]
    pred_ptr[0] = 0
    pred_ptr[1:] = np.cumsum(np.bincount(targets, minlength=pred_ptr.size - 1))


def plan_incremental(succ, prob, nnz, rhat, v, n_states, n_actions, gamma, theta, max_sweeps,
                     scratch, dirty, queue, changed, n_dirty, pred_ptr, pred_idx):
    # Without compiled loops, full vectorised sweeps are faster than
    # chasing the dirty set; the result is the same fixed-point iteration.
    sweeps, delta = value_iteration(succ, prob, nnz, rhat, v, n_states, n_actions, gamma,
                                    theta, max_sweeps, scratch)
    dirty[:] = 0
    return sweeps, delta, 0


def true_online_update(w, z, idx, alpha, gl, delta, q, q_old):
    zx = float(z[idx].sum())
    z *= gl
    np.add.at(z, idx, 1.0 - alpha * gl * zx)
    c = alpha * (delta + q - q_old)
    if c != 0.0:
        w += c * z
    np.subtract.at(w, idx, alpha * (q - q_old))


def tile_indices(x, v, x_lo, x_hi, v_lo, v_hi, n_tilings, tiles, out):
    sx = (x - x_lo) / (x_hi - x_lo) * tiles
    sv = (v - v_lo) / (v_hi - v_lo) * tiles
    for k in range(n_tilings):
        off = k / n_tilings
        ix = min(int(math.floor(sx + off)), tiles - 1)
        iv = min(int(math.floor(sv + off)), tiles - 1)
        out[k] = k * tiles * tiles + iv * tiles + ix


def sum_at(w, idx, offset):
    return float(w[offset + idx].sum())
