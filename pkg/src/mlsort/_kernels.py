"""Compiled inner loops.

All kernels are ``nogil`` so shards can run on a thread pool.  None of them
uses fastmath: the forward pass must give bit-identical results regardless of
how the input is split.
"""
from math import exp

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def logistic(t):
    return 1.0 / (1.0 + exp(-t))


@_jit
def rescale(x, lo, scale):
    # affine map [lo, hi] -> [-1, 1]; scale = 2 / (hi - lo)
    return (x - lo) * scale - 1.0


@_jit
def gvm_forward(w1, w2, b, beta, lo, scale, x, out):
    """out[i] = sum_j w2[j] * logistic(beta[j] * (w1[j] * xh[i] - b[j])).

    Returns the number of activation evaluations performed.
    """
    m = w1.shape[0]
    evals = 0
    for i in range(x.shape[0]):
        xh = rescale(x[i], lo, scale)
        y = 0.0
        for j in range(m):
            y += w2[j] * logistic(beta[j] * (w1[j] * xh - b[j]))
            evals += 1
        out[i] = y
    return evals


@_jit
def mc_train(xh, t, P, S, js, ks, zs, target_loss, enforce_monotone, accepted_losses):
    """Greedy single-coordinate Monte-Carlo search over GVM parameters.

    ``P`` is (m, 4) with columns w1, w2, b, beta and is updated in place.
    ``S`` holds per-coordinate step multipliers, adapted in place.
    Returns (final_loss, n_accepted, n_proposals).
    """
    m = P.shape[0]
    n = xh.shape[0]
    H = np.empty((m, n))
    y = np.zeros(n)
    for j in range(m):
        for i in range(n):
            H[j, i] = logistic(P[j, 3] * (P[j, 0] * xh[i] - P[j, 2]))
            y[i] += P[j, 1] * H[j, i]
    loss = 0.0
    for i in range(n):
        d = y[i] - t[i]
        loss += d * d
    loss /= n

    h = np.empty(n)
    p = np.empty(4)
    n_acc = 0
    it = 0
    while it < js.shape[0]:
        if loss <= target_loss:
            break
        j = js[it]
        k = ks[it]
        it += 1
        for q in range(4):
            p[q] = P[j, q]
        p[k] += zs[it - 1] * S[j, k] * (1.0 + abs(p[k]))
        if enforce_monotone and p[0] * p[1] * p[3] < 0.0:
            S[j, k] = max(S[j, k] * 0.95, 1e-9)
            continue
        new_loss = 0.0
        old_w2 = P[j, 1]
        for i in range(n):
            h[i] = logistic(p[3] * (p[0] * xh[i] - p[2]))
            d = y[i] + p[1] * h[i] - old_w2 * H[j, i] - t[i]
            new_loss += d * d
        new_loss /= n
        if new_loss < loss:
            for i in range(n):
                y[i] += p[1] * h[i] - old_w2 * H[j, i]
                H[j, i] = h[i]
            for q in range(4):
                P[j, q] = p[q]
            loss = new_loss
            accepted_losses[n_acc] = loss
            n_acc += 1
            S[j, k] = min(S[j, k] * 1.5, 10.0)
        else:
            S[j, k] = max(S[j, k] * 0.95, 1e-9)
    return loss, n_acc, it


@_jit
def counting_place(ranks, keys, n):
    """Stable counting-sort scatter of ``keys`` into ``n`` rank buckets.

    Returns (offsets, placed): bucket r holds placed[offsets[r]:offsets[r+1]].
    """
    offsets = np.zeros(n + 1, dtype=np.int64)
    for i in range(ranks.shape[0]):
        offsets[ranks[i] + 1] += 1
    for r in range(n):
        offsets[r + 1] += offsets[r]
    cursor = offsets[:-1].copy()
    placed = np.empty(keys.shape[0], dtype=keys.dtype)
    for i in range(ranks.shape[0]):
        r = ranks[i]
        placed[cursor[r]] = keys[i]
        cursor[r] += 1
    return offsets, placed


@_jit
def sort_buckets(offsets, keys):
    """Stable insertion sort of each bucket, in place."""
    for r in range(offsets.shape[0] - 1):
        start = offsets[r]
        stop = offsets[r + 1]
        for i in range(start + 1, stop):
            v = keys[i]
            k = i - 1
            while k >= start and keys[k] > v:
                keys[k + 1] = keys[k]
                k -= 1
            keys[k + 1] = v


@_jit
def windowed_insertion(a, window):
    """Insertion sort where an element moves back at most ``window - 1`` slots."""
    for i in range(1, a.shape[0]):
        v = a[i]
        k = i - 1
        floor = max(i - window + 1, 0)
        while k >= floor and a[k] > v:
            a[k + 1] = a[k]
            k -= 1
        a[k + 1] = v


@_jit
def is_sorted_asc(a):
    for i in range(1, a.shape[0]):
        if a[i - 1] > a[i]:
            return False
    return True


@_jit
def _bisect(keys, x, lo, hi, right):
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < x or (right and keys[mid] == x):
            lo = mid + 1
        else:
            hi = mid
    return lo


@_jit
def window_search(keys, probes, centres, radius, first, stop):
    """Equal-range search of each probe inside ``[centre - radius, centre + radius]``.

    Writes the block ``[first, stop)`` of positions equal to the probe (empty
    block = insertion point).  A probe whose block touches a window edge that
    the neighbouring key shows to be wrong is re-searched over the whole
    array; the number of such fallbacks is returned.
    """
    n = keys.shape[0]
    fallbacks = 0
    for i in range(probes.shape[0]):
        x = probes[i]
        lo = max(centres[i] - radius, 0)
        hi = min(centres[i] + radius + 1, n)
        a = _bisect(keys, x, lo, hi, False)
        b = _bisect(keys, x, a, hi, True)
        if (a == lo and lo > 0 and keys[lo - 1] >= x) or (b == hi and hi < n and keys[hi] <= x):
            fallbacks += 1
            a = _bisect(keys, x, 0, n, False)
            b = _bisect(keys, x, a, n, True)
        first[i] = a
        stop[i] = b
    return fallbacks
