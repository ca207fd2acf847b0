"""Pure-Python reference versions of the hot loops in ``_kernels.pyx``."""
import math

import numpy as np


def assign_members(node_x, node_y, eligible, ch_x, ch_y, noise,
                   beta, gamma, i0, alpha, tx_range):
    """Pick, for every eligible node, the cluster head of highest firefly intensity.

    Each (node, head) pair moves the head's position one firefly step toward
    the node, and the node scores the head by ``i0 / (1 + gamma * s**2)`` where
    ``s`` is the distance from the node to that moved position. Heads beyond
    ``tx_range`` are skipped; ties go to the lower head index. Returns the head
    index per node (-1 when none is reachable) and the winning intensity.
    """
    n = len(node_x)
    m = len(ch_x)
    choice = np.full(n, -1, dtype=np.int64)
    best = np.zeros(n, dtype=np.float64)
    r2max = tx_range * tx_range
    for i in range(n):
        if not eligible[i]:
            continue
        nx = float(node_x[i])
        ny = float(node_y[i])
        top = -1.0
        pick = -1
        for j in range(m):
            cx = float(ch_x[j])
            cy = float(ch_y[j])
            dx = nx - cx
            dy = ny - cy
            r2 = dx * dx + dy * dy
            if r2 > r2max:
                continue
            att = beta * math.exp(-gamma * r2)
            px = cx + att * dx + alpha * float(noise[i, j, 0])
            py = cy + att * dy + alpha * float(noise[i, j, 1])
            sx = nx - px
            sy = ny - py
            inten = i0 / (1.0 + gamma * (sx * sx + sy * sy))
            if inten > top:
                top = inten
                pick = j
        choice[i] = pick
        best[i] = top if pick >= 0 else 0.0
    return choice, best


def scan_threshold(times, keys, n_keys, count_threshold, interval_threshold, window):
    """Index of the first packet whose sender exceeds a sync threshold, or -1.

    A sender trips the detector when more than ``count_threshold`` of its
    packets fall inside ``(t - window, t]`` or when two consecutive packets
    arrive less than ``interval_threshold`` apart. ``times`` must be sorted.
    """
    thr = int(count_threshold)
    hist = [[] for _ in range(n_keys)]
    for i in range(len(times)):
        t = float(times[i])
        h = hist[int(keys[i])]
        if h:
            if t - h[-1] < interval_threshold:
                return i
            if len(h) >= thr and h[-thr] > t - window:
                return i
        h.append(t)
        if len(h) > thr:
            del h[0]
    return -1


def wake_scan(times, accept, base_start, base_end, extend, lo, hi, received):
    """Which packets a duty-cycled radio hears, and how long it stays awake.

    The radio is awake during the sorted, disjoint ``[base_start, base_end)``
    windows. A packet at ``t`` is heard when the radio is awake at ``t``; a
    heard packet with ``accept`` set keeps the radio listening until
    ``t + extend``. Packets outside ``[lo, hi)`` are ignored. Fills
    ``received`` (0/1 per packet) and returns the awake time inside
    ``[lo, hi)``.
    """
    nb = len(base_start)
    b = 0
    ext_s = []
    ext_e = []
    ext_until = -math.inf
    for i in range(len(times)):
        t = float(times[i])
        received[i] = 0
        if t < lo or t >= hi:
            continue
        while b < nb and base_end[b] <= t:
            b += 1
        awake = (b < nb and base_start[b] <= t) or t < ext_until
        if not awake:
            continue
        received[i] = 1
        if accept[i]:
            end = min(t + extend, hi)
            if ext_e and t <= ext_e[-1]:
                if end > ext_e[-1]:
                    ext_e[-1] = end
            else:
                ext_s.append(t)
                ext_e.append(end)
            ext_until = ext_e[-1]
    # measure of the union of both interval lists, clipped to [lo, hi)
    total = 0.0
    cur_s = cur_e = None
    i = j = 0
    ne = len(ext_s)
    while i < nb or j < ne:
        if j >= ne or (i < nb and base_start[i] <= ext_s[j]):
            s, e = float(base_start[i]), float(base_end[i])
            i += 1
        else:
            s, e = ext_s[j], ext_e[j]
            j += 1
        s = max(s, lo)
        e = min(e, hi)
        if e <= s:
            continue
        if cur_e is None or s > cur_e:
            if cur_e is not None:
                total += cur_e - cur_s
            cur_s, cur_e = s, e
        elif e > cur_e:
            cur_e = e
    if cur_e is not None:
        total += cur_e - cur_s
    return total
