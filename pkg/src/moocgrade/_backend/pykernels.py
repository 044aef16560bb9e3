"""Pure numpy/python kernels: the fallback backend.

These mirror the compiled kernels in `_ckernels.pyx` operation-for-operation.
The split scans keep float accumulation in the same (sequential) order as the
C loops so that both backends pick identical splits; the skip-gram trainer
draws an identical random stream but applies vector updates through BLAS, so
trained vectors match the compiled backend statistically, not bit-for-bit.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from ..rng import MASK64, _GOLDEN, _MIX1, _MIX2, _INV53

COMPILED = False


def scan_split_gini(values, labels, n_classes, min_leaf):
    """Best Gini split of one pre-sorted feature column.

    `values` ascending, `labels` aligned. Returns (pos, threshold, gain)
    where left = [0..pos]; pos = -1 when no valid split exists. The gain is
    the impurity decrease scaled by the node sample count:
    sum_k cL_k^2/nL + sum_k cR_k^2/nR - sum_k c_k^2/n.
    """
    n = len(values)
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    onehot = (labels[:, None] == np.arange(n_classes)[None, :]).astype(
        np.int64)
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    n_left = np.arange(1, n, dtype=np.int64)
    sumsq_left = (cum[:-1] ** 2).sum(axis=1)
    sumsq_right = ((total[None, :] - cum[:-1]) ** 2).sum(axis=1)
    parent = (total ** 2).sum() / n
    gains = sumsq_left / n_left + sumsq_right / (n - n_left) - parent
    valid = (values[:-1] < values[1:]) & (n_left >= min_leaf) \
        & ((n - n_left) >= min_leaf)
    if not valid.any():
        return -1, 0.0, 0.0
    gains = np.where(valid, gains, -np.inf)
    pos = int(np.argmax(gains))
    return pos, _midpoint(values[pos], values[pos + 1]), float(gains[pos])


def scan_split_mse(values, targets, min_leaf):
    """Best squared-error split of one pre-sorted feature column.

    Gain is the sum-of-squared-error reduction (variance decrease times the
    node sample count): SL^2/nL + SR^2/nR - S^2/n.
    """
    n = len(values)
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    cum = np.cumsum(targets)
    total = cum[-1]
    n_left = np.arange(1, n, dtype=np.int64)
    s_left = cum[:-1]
    s_right = total - s_left
    gains = s_left ** 2 / n_left + s_right ** 2 / (n - n_left) \
        - total ** 2 / n
    valid = (values[:-1] < values[1:]) & (n_left >= min_leaf) \
        & ((n - n_left) >= min_leaf)
    if not valid.any():
        return -1, 0.0, 0.0
    gains = np.where(valid, gains, -np.inf)
    pos = int(np.argmax(gains))
    return pos, _midpoint(values[pos], values[pos + 1]), float(gains[pos])


def scan_split_xgb(values, grad, hess, lam, gamma, min_leaf):
    """Best second-order split of one pre-sorted feature column.

    Gain = 0.5*(GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)) - gamma.
    """
    n = len(values)
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    gcum = np.cumsum(grad)
    hcum = np.cumsum(hess)
    g_total = gcum[-1]
    h_total = hcum[-1]
    gl = gcum[:-1]
    hl = hcum[:-1]
    gr = g_total - gl
    hr = h_total - hl
    parent = g_total ** 2 / (h_total + lam)
    gains = 0.5 * (gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam) - parent) \
        - gamma
    n_left = np.arange(1, n, dtype=np.int64)
    valid = (values[:-1] < values[1:]) & (n_left >= min_leaf) \
        & ((n - n_left) >= min_leaf)
    if not valid.any():
        return -1, 0.0, 0.0
    gains = np.where(valid, gains, -np.inf)
    pos = int(np.argmax(gains))
    return pos, _midpoint(values[pos], values[pos + 1]), float(gains[pos])


def _midpoint(lo, hi):
    """Split threshold between two consecutive distinct values.

    Falls back to the lower value if the midpoint rounds up to `hi`, so the
    x <= t routing always reproduces the training partition.
    """
    thr = 0.5 * (lo + hi)
    if thr >= hi:
        thr = lo
    return float(thr)


def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def sgns_train(syn0, syn1, walks, walk_lo, walk_hi, window, negative,
               cum_table, alpha0, alpha_min, step, total_steps, rng_state):
    """One pass of skip-gram negative-sampling SGD over walks[walk_lo:hi].

    For every walk position, every node within `window` positions is a
    positive context; `negative` nodes are drawn per positive from the
    cumulative 3/4-power unigram table (draws colliding with the positive
    are dropped). The learning rate decays linearly in the global position
    counter `step` over `total_steps`, floored at `alpha_min`. Returns the
    advanced (rng_state, step).
    """
    L = walks.shape[1]
    cum = list(cum_table)
    total_w = cum[-1]
    n_nodes = len(cum)
    state = rng_state & MASK64
    for w in range(walk_lo, walk_hi):
        walk = walks[w]
        wl = L
        for t in range(L):
            if walk[t] < 0:
                wl = t
                break
        for i in range(wl):
            center = int(walk[i])
            alpha = alpha0 * (1.0 - step / total_steps)
            if alpha < alpha_min:
                alpha = alpha_min
            step += 1
            u = syn0[center]
            lo = i - window
            if lo < 0:
                lo = 0
            hi = i + window + 1
            if hi > wl:
                hi = wl
            for j in range(lo, hi):
                if j == i:
                    continue
                context = int(walk[j])
                neu = np.zeros_like(u)
                for d in range(negative + 1):
                    if d == 0:
                        target = context
                        label = 1.0
                    else:
                        state = (state + _GOLDEN) & MASK64
                        z = state
                        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
                        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
                        z ^= z >> 31
                        r = (z >> 11) * _INV53 * total_w
                        target = bisect_right(cum, r)
                        if target >= n_nodes:
                            target = n_nodes - 1
                        if target == context:
                            continue
                        label = 0.0
                    v = syn1[target]
                    g = (label - _sigmoid(float(np.dot(u, v)))) * alpha
                    neu += g * v
                    v += g * u
                u += neu
    return state, step
