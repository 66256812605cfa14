"""Pure numpy implementations of the hot kernels (fallback for the compiled core)."""

from __future__ import annotations

import numpy as np


def node_moments(W, probs, dxc, cls, n_cls):
    """Per-node mean, driver regression slope and class-conditional means.

    ``W`` is ``(n, B)``; returns ``(Y, Z, d, var)`` where ``d[:, l]`` is
    ``E[W - Y | class l]`` (0 for classes without mass).
    """
    Y = W @ probs
    D = W - Y[:, None]
    var = float(probs @ (dxc * dxc))
    if var > 0:
        Z = D @ (probs * dxc) / var
    else:
        Z = np.zeros(W.shape[0])
    onehot = np.zeros((probs.size, n_cls))
    onehot[np.arange(probs.size), cls] = probs
    p_cls = onehot.sum(axis=0)
    S = D @ onehot
    d = np.divide(S, p_cls, out=np.zeros_like(S), where=p_cls > 0)
    return Y, Z, d, var


def w2_sorted(xa, wa, xb, wb):
    """Squared W2 between two weighted 1-D laws whose atoms are sorted ascending.

    The monotone coupling pairs quantiles: both cumulative distribution
    functions are cut at the union of their jump levels.
    """
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    ca /= ca[-1]
    cb /= cb[-1]
    levels = np.union1d(ca, cb)
    seg = np.diff(levels, prepend=0.0)
    mid = levels - 0.5 * seg
    ia = np.minimum(np.searchsorted(ca, mid), len(xa) - 1)
    ib = np.minimum(np.searchsorted(cb, mid), len(xb) - 1)
    diff = np.asarray(xa)[ia] - np.asarray(xb)[ib]
    return float(seg @ (diff * diff))
