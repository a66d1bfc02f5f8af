"""Pure-numpy implementations of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``SYNTHGUARD_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_gates_forward(z, c_prev):
    """Apply the LSTM gate nonlinearities to the stacked pre-activations.

    ``z`` has columns ``[input | forget | candidate | output]``.  Returns
    ``(h, c, gates, tanh_c)`` where ``gates`` holds the activated gates.
    """
    hidden = c_prev.shape[1]
    gates = np.empty_like(z)
    gates[:, : 2 * hidden] = _sigmoid(z[:, : 2 * hidden])
    gates[:, 2 * hidden : 3 * hidden] = np.tanh(z[:, 2 * hidden : 3 * hidden])
    gates[:, 3 * hidden :] = _sigmoid(z[:, 3 * hidden :])
    i = gates[:, :hidden]
    f = gates[:, hidden : 2 * hidden]
    g = gates[:, 2 * hidden : 3 * hidden]
    o = gates[:, 3 * hidden :]
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, gates, tanh_c


def lstm_gates_backward(dh, dc, gates, c_prev, tanh_c):
    """Backpropagate through :func:`lstm_gates_forward`; returns ``(dz, dc_prev)``."""
    hidden = c_prev.shape[1]
    i = gates[:, :hidden]
    f = gates[:, hidden : 2 * hidden]
    g = gates[:, 2 * hidden : 3 * hidden]
    o = gates[:, 3 * hidden :]
    dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
    dz = np.empty_like(gates)
    dz[:, :hidden] = dc_total * g * i * (1.0 - i)
    dz[:, hidden : 2 * hidden] = dc_total * c_prev * f * (1.0 - f)
    dz[:, 2 * hidden : 3 * hidden] = dc_total * i * (1.0 - g * g)
    dz[:, 3 * hidden :] = dh * tanh_c * o * (1.0 - o)
    return dz, dc_total * f


def auc_raw(members, nonmembers):
    """P(member > nonmember) + 0.5 P(tie), via the rank-sum statistic."""
    members = np.asarray(members, dtype=np.float64)
    nonmembers = np.asarray(nonmembers, dtype=np.float64)
    n1, n2 = members.size, nonmembers.size
    pooled = np.concatenate([members, nonmembers])
    order = np.argsort(pooled, kind="mergesort")
    sorted_vals = pooled[order]
    ranks = np.empty(pooled.size, dtype=np.float64)
    # average ranks over tie groups
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], pooled.size]
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n2))


def max_tpr_fpr_gap(members, nonmembers):
    """max over thresholds t of |P(member >= t) - P(nonmember >= t)|."""
    members = np.sort(np.asarray(members, dtype=np.float64))
    nonmembers = np.sort(np.asarray(nonmembers, dtype=np.float64))
    thresholds = np.unique(np.concatenate([members, nonmembers]))
    tpr = 1.0 - np.searchsorted(members, thresholds, side="left") / members.size
    fpr = 1.0 - np.searchsorted(nonmembers, thresholds, side="left") / nonmembers.size
    return float(np.max(np.abs(tpr - fpr)))


def acf(x, max_lag):
    """Sample autocorrelation coefficients r_0..r_max_lag (caller checks variance)."""
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean()
    denom = float(d @ d)
    n = d.size
    return np.array([float(d[: n - k] @ d[k:]) / denom for k in range(max_lag + 1)])
