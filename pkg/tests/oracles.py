"""Independent reference implementations used by several test modules."""

import itertools

import numpy as np


def viterbi_argmin(costs, p1, p2):
    """Per-pixel argmin of the min-sum path cost along one left-to-right scanline.

    Enumerates every disparity sequence ending at each pixel, with no
    normalising subtraction, so it shares no code path with the recurrence.
    """
    n, nd = costs.shape
    out = []
    for x in range(n):
        best = np.full(nd, np.inf)
        for seq in itertools.product(range(nd), repeat=x + 1):
            total = 0.0
            for i, d in enumerate(seq):
                total += costs[i, d]
                if i:
                    jump = abs(d - seq[i - 1])
                    total += 0.0 if jump == 0 else (p1 if jump == 1 else p2)
            best[seq[-1]] = min(best[seq[-1]], total)
        out.append(int(np.argmin(best)))
    return out


def viterbi_table(costs, p1, p2):
    """Min-sum forward pass with an explicit transition-penalty matrix."""
    n, nd = costs.shape
    dd = np.abs(np.subtract.outer(np.arange(nd), np.arange(nd)))
    trans = np.where(dd == 0, 0.0, np.where(dd == 1, p1, p2))
    table = np.empty((n, nd))
    table[0] = costs[0]
    for x in range(1, n):
        table[x] = costs[x] + np.min(table[x - 1][:, None] + trans, axis=0)
    return table


def conv_relu_stack(params, patches):
    """Reference forward pass by explicit kernel-offset sums.

    ``params`` is ``[w1, b1, ..., w4, b4]`` with ``w`` shaped (out, in, k, k),
    applied as cross-correlation. Returns the final pre-normalisation outputs
    and the boolean ReLU pattern of every hidden layer.
    """
    x = np.asarray(patches, dtype=np.float64)[..., None]
    patterns = []
    n_layers = len(params) // 2
    for i in range(n_layers):
        w, b = params[2 * i], params[2 * i + 1]
        k = w.shape[-1]
        ho, wo = x.shape[1] - k + 1, x.shape[2] - k + 1
        y = np.zeros((x.shape[0], ho, wo, w.shape[0])) + b
        for ky in range(k):
            for kx in range(k):
                y += np.einsum("nhwc,oc->nhwo", x[:, ky : ky + ho, kx : kx + wo], w[:, :, ky, kx])
        if i < n_layers - 1:
            patterns.append(y > 0)
            y = np.maximum(y, 0)
        x = y
    return x, np.concatenate([p.reshape(len(p), -1) for p in patterns], axis=1)
