"""Compiled scans of the bridge functional over a discretized grid."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def scan_bridge(W, m, lattice, k, drift):  # pragma: no cover - compiled
    """Return (max |B + d|, sum (B + d)^2) over increasing k-subsets of ``lattice``.

    ``W`` holds the path at i/m for i = 0..m. ``drift`` holds the k
    local-alternative constants (all zero under the null).
    """
    L = lattice.shape[0]
    pos = np.empty(k, np.int64)
    for p in range(k):
        pos[p] = p
    t = np.empty(k + 2)
    w = np.empty(k + 2)
    t[0] = 0.0
    t[k + 1] = 1.0
    w[0] = W[0]
    w[k + 1] = W[m]
    best = 0.0
    total = 0.0
    inv_m = 1.0 / m
    use_drift = False
    for p in range(k):
        if drift[p] != 0.0:
            use_drift = True
    while True:
        for p in range(k):
            idx = lattice[pos[p]]
            t[p + 1] = idx * inv_m
            w[p + 1] = W[idx]
        b = 0.0
        for l in range(1, k + 1):
            b += (t[l + 1] - t[l]) * (w[l] - w[l - 1]) - (t[l] - t[l - 1]) * (w[l + 1] - w[l])
        if use_drift:
            for l in range(1, k + 1):
                b += drift[l - 1] * (t[l + 1] - t[l]) * (t[l] - t[l - 1])
        a = abs(b)
        if a > best:
            best = a
        total += b * b
        # next combination in lexicographic order
        p = k - 1
        while p >= 0 and pos[p] == L - k + p:
            p -= 1
        if p < 0:
            break
        pos[p] += 1
        for q in range(p + 1, k):
            pos[q] = pos[q - 1] + 1
    return best, total
