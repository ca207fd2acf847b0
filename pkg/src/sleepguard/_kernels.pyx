# cython: language_level=3
"""Compiled versions of the hot loops; semantics mirror ``_kernels_py``."""
import numpy as np
from libc.math cimport exp


def assign_members(const double[::1] node_x, const double[::1] node_y,
                   const unsigned char[::1] eligible,
                   const double[::1] ch_x, const double[::1] ch_y,
                   const double[:, :, ::1] noise,
                   double beta, double gamma, double i0, double alpha, double tx_range):
    cdef Py_ssize_t n = node_x.shape[0]
    cdef Py_ssize_t m = ch_x.shape[0]
    choice_arr = np.full(n, -1, dtype=np.int64)
    best_arr = np.zeros(n, dtype=np.float64)
    cdef long long[::1] choice = choice_arr
    cdef double[::1] best = best_arr
    cdef double r2max = tx_range * tx_range
    cdef Py_ssize_t i, j
    cdef long long pick
    cdef double nx, ny, cx, cy, dx, dy, r2, att, px, py, sx, sy, inten, top
    for i in range(n):
        if not eligible[i]:
            continue
        nx = node_x[i]
        ny = node_y[i]
        top = -1.0
        pick = -1
        for j in range(m):
            cx = ch_x[j]
            cy = ch_y[j]
            dx = nx - cx
            dy = ny - cy
            r2 = dx * dx + dy * dy
            if r2 > r2max:
                continue
            att = beta * exp(-gamma * r2)
            px = cx + att * dx + alpha * noise[i, j, 0]
            py = cy + att * dy + alpha * noise[i, j, 1]
            sx = nx - px
            sy = ny - py
            inten = i0 / (1.0 + gamma * (sx * sx + sy * sy))
            if inten > top:
                top = inten
                pick = j
        choice[i] = pick
        best[i] = top if pick >= 0 else 0.0
    return choice_arr, best_arr


def scan_threshold(const double[::1] times, const long long[::1] keys, Py_ssize_t n_keys,
                   long count_threshold, double interval_threshold, double window):
    cdef Py_ssize_t n = times.shape[0]
    # a count trip needs `thr` earlier packets, impossible when thr exceeds the trace
    cdef bint use_count = count_threshold <= n
    cdef Py_ssize_t thr = count_threshold if use_count else 1
    # ring of the last `thr` arrival times per key
    ring_arr = np.zeros(n_keys * thr, dtype=np.float64)
    fill_arr = np.zeros(n_keys, dtype=np.int64)
    head_arr = np.zeros(n_keys, dtype=np.int64)
    last_arr = np.zeros(n_keys, dtype=np.float64)
    cdef double[::1] ring = ring_arr
    cdef long long[::1] fill = fill_arr
    cdef long long[::1] head = head_arr
    cdef double[::1] last = last_arr
    cdef Py_ssize_t i, k
    cdef double t
    for i in range(n):
        t = times[i]
        k = keys[i]
        if fill[k] > 0:
            if t - last[k] < interval_threshold:
                return i
            # head points at the oldest of the stored `thr` times once full
            if use_count and fill[k] >= thr and ring[k * thr + head[k]] > t - window:
                return i
        ring[k * thr + head[k]] = t
        head[k] = (head[k] + 1) % thr
        if fill[k] < thr:
            fill[k] += 1
        last[k] = t
    return -1


def wake_scan(const double[::1] times, const unsigned char[::1] accept,
              const double[::1] base_start, const double[::1] base_end,
              double extend, double lo, double hi, unsigned char[::1] received):
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t nb = base_start.shape[0]
    ext_s_arr = np.empty(n, dtype=np.float64)
    ext_e_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] ext_s = ext_s_arr
    cdef double[::1] ext_e = ext_e_arr
    cdef Py_ssize_t ne = 0, b = 0, i, j
    cdef double t, end, s, e, cur_s = 0.0, cur_e = 0.0, total = 0.0
    cdef double ext_until = -1e300
    cdef bint awake, have = False
    for i in range(n):
        t = times[i]
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
            end = t + extend
            if end > hi:
                end = hi
            if ne > 0 and t <= ext_e[ne - 1]:
                if end > ext_e[ne - 1]:
                    ext_e[ne - 1] = end
            else:
                ext_s[ne] = t
                ext_e[ne] = end
                ne += 1
            ext_until = ext_e[ne - 1]
    i = 0
    j = 0
    while i < nb or j < ne:
        if j >= ne or (i < nb and base_start[i] <= ext_s[j]):
            s = base_start[i]
            e = base_end[i]
            i += 1
        else:
            s = ext_s[j]
            e = ext_e[j]
            j += 1
        if s < lo:
            s = lo
        if e > hi:
            e = hi
        if e <= s:
            continue
        if not have or s > cur_e:
            if have:
                total += cur_e - cur_s
            cur_s = s
            cur_e = e
            have = True
        elif e > cur_e:
            cur_e = e
    if have:
        total += cur_e - cur_s
    return total
