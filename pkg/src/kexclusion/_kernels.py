"""Numba event loops shared by the dynamics and coupling modules.

All kernels take the merged, time-sorted event arrays of an ``EpochTable``
(``times``, ``sites``, ``sizes``) plus a start index, process events while
``times[idx] <= t_stop`` and return the index of the first unprocessed event.
Arrays describing configurations are mutated in place.

Index conventions: occupancy arrays hold sites ``lo .. lo+len-1``; an event at
site ``m`` is active only if both ``m`` and ``m+1`` lie in the window.  Height
arrays hold indices ``lo .. lo+len-1`` and only interior indices are updated;
the two end entries are frozen.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Stand-in for -infinity in integer height arrays (K = infinity wedges).
NEG = -(2**61)
# Practical cap on a single K = infinity occupancy.
OCC_CAP = 2**40


@njit(cache=True)
def time_order(times, horizon):
    """Permutation sorting ``times`` ascending (bucket sort + insertion sort)."""
    n = times.size
    order = np.empty(n, np.int64)
    if n == 0:
        return order
    nb = max(1, n // 4)
    scale = nb / horizon
    counts = np.zeros(nb + 1, np.int64)
    for i in range(n):
        b = int(times[i] * scale)
        if b >= nb:
            b = nb - 1
        elif b < 0:
            b = 0
        counts[b + 1] += 1
    for b in range(nb):
        counts[b + 1] += counts[b]
    fill = counts[:-1].copy()
    for i in range(n):
        b = int(times[i] * scale)
        if b >= nb:
            b = nb - 1
        elif b < 0:
            b = 0
        order[fill[b]] = i
        fill[b] += 1
    for b in range(nb):
        lo = counts[b]
        hi = counts[b + 1]
        for p in range(lo + 1, hi):
            cur = order[p]
            tc = times[cur]
            q = p - 1
            while q >= lo and times[order[q]] > tc:
                order[q + 1] = order[q]
                q -= 1
            order[q + 1] = cur
    return order


@njit(cache=True)
def occupancy_advance(occ, lo, K, kinf, times, sites, sizes, idx, t_stop,
                      log_idx, log_moved, nlog):
    """Apply the jump rule b = min{h, eta(i), K - eta(i+1)} at each epoch.

    When ``log_idx`` has positive length every processed active event is
    appended to the log.  Returns ``(idx, nlog, status)``; ``status`` is 0 on
    success and 1 if the K = infinity occupancy cap was exceeded.
    """
    n = occ.size
    nev = times.size
    status = 0
    while idx < nev and times[idx] <= t_stop:
        j = sites[idx] - lo
        if 0 <= j and j < n - 1:
            h = sizes[idx]
            a = occ[j]
            c = occ[j + 1]
            if kinf:
                b = min(h, a)
            else:
                b = min(h, a, K - c)
            if b > 0:
                occ[j] = a - b
                occ[j + 1] = c + b
                if kinf and c + b > OCC_CAP:
                    status = 1
            if log_idx.size > 0:
                log_idx[nlog] = idx
                log_moved[nlog] = b
                nlog += 1
        idx += 1
    return idx, nlog, status


@njit(cache=True)
def height_advance(z, lo, K, kinf, times, sites, idx, t_stop, shift):
    """Max-rule z(i) = max{z(i)-1, z(i-1), z(i+1)-K} at epochs of D_{i+shift}."""
    n = z.size
    nev = times.size
    while idx < nev and times[idx] <= t_stop:
        j = sites[idx] - shift - lo
        if 0 < j and j < n - 1:
            v = z[j] - 1
            if z[j - 1] > v:
                v = z[j - 1]
            if not kinf:
                r = z[j + 1] - K
                if r > v:
                    v = r
            z[j] = v
        idx += 1
    return idx


@njit(cache=True)
def family_advance(W, lo, K, kinf, times, sites, idx, t_stop):
    """Evolve a family of height processes stored column-wise in ``W[m, k]``.

    Every column reads the same clocks in absolute coordinates, which is how
    the translated processes w^k(i-k, t) are laid out.
    """
    n = W.shape[0]
    nk = W.shape[1]
    nev = times.size
    while idx < nev and times[idx] <= t_stop:
        j = sites[idx] - lo
        if 0 < j and j < n - 1:
            for kk in range(nk):
                v = W[j, kk] - 1
                left = W[j - 1, kk]
                if left > v:
                    v = left
                if not kinf:
                    r = W[j + 1, kk] - K
                    if r > v:
                        v = r
                W[j, kk] = v
        idx += 1
    return idx


@njit(cache=True)
def pair_advance(z, zt, lo, K, kinf, times, sites, idx, t_stop, X,
                 path_t, path_x, npath):
    """Basic coupling of two height processes with one discrepancy.

    Tracks X with zt(i) = z(i) for i < X and zt(i) = z(i) + 1 for i >= X.
    Returns ``(idx, X, npath, status)``; status 1 means the discrepancy
    pattern was broken (a bug trap, never expected).
    """
    n = z.size
    nev = times.size
    status = 0
    while idx < nev and times[idx] <= t_stop:
        j = sites[idx] - lo
        if 0 < j and j < n - 1:
            v = z[j] - 1
            if z[j - 1] > v:
                v = z[j - 1]
            vt = zt[j] - 1
            if zt[j - 1] > vt:
                vt = zt[j - 1]
            if not kinf:
                r = z[j + 1] - K
                if r > v:
                    v = r
                r = zt[j + 1] - K
                if r > vt:
                    vt = r
            z[j] = v
            zt[j] = vt
            i = lo + j
            d = vt - v
            if i == X - 1:
                if d == 1:
                    X = i
                elif d != 0:
                    status = 1
            elif i == X:
                if d == 0:
                    X = i + 1
                elif d != 1:
                    status = 1
            elif i < X - 1:
                if d != 0:
                    status = 1
            else:
                if d != 1:
                    status = 1
            if status != 0:
                return idx, X, npath, status
            if path_t.size > 0 and X != path_x[npath - 1]:
                path_t[npath] = times[idx]
                path_x[npath] = X
                npath += 1
        idx += 1
    return idx, X, npath, status


@njit(cache=True)
def second_class_advance(occ, lo, K, kinf, times, sites, sizes, idx, t_stop,
                         x, path_t, path_x, npath):
    """Occupancy dynamics with a second-class particle, recording its jumps."""
    n = occ.size
    nev = times.size
    status = 0
    while idx < nev and times[idx] <= t_stop:
        m = sites[idx]
        j = m - lo
        if 0 <= j and j < n - 1:
            h = sizes[idx]
            a = occ[j]
            c = occ[j + 1]
            if kinf:
                b = min(h, a)
            else:
                b = min(h, a, K - c)
            moved = False
            if m == x:
                if kinf:
                    bt = min(h, a + 1)
                else:
                    bt = min(h, a + 1, K - c)
                if bt > b:
                    x = m + 1
                    moved = True
            elif m == x - 1 and not kinf:
                bt = min(h, a, K - c - 1)
                if bt < b:
                    x = m
                    moved = True
            if b > 0:
                occ[j] = a - b
                occ[j + 1] = c + b
                if kinf and c + b > OCC_CAP:
                    status = 1
            if moved and path_t.size > 0:
                path_t[npath] = times[idx]
                path_x[npath] = x
                npath += 1
        idx += 1
    return idx, x, npath, status
