# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics mirror ``_pure`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef long long i64
ctypedef unsigned long long u64

cdef enum:
    EXEC = 0
    BLOCKED = 1


def simulate_fp(period, wcet, deadline, rank, core, lockmask, Py_ssize_t n_cores,
                i64 horizon, bint queue_overrun=False):
    cdef Py_ssize_t n = len(period)
    segments = []
    releases = []
    completions = []
    misses = []
    if horizon <= 0 or n == 0:
        return segments, releases, completions, misses

    cdef i64[::1] T = np.ascontiguousarray(period, dtype=np.int64)
    cdef i64[::1] C = np.ascontiguousarray(wcet, dtype=np.int64)
    cdef i64[::1] D = np.ascontiguousarray(deadline, dtype=np.int64)
    cdef i64[::1] P = np.ascontiguousarray(core, dtype=np.int64)
    cdef u64[::1] M = np.ascontiguousarray(lockmask, dtype=np.uint64)
    cdef Py_ssize_t i, c, j, k, w
    for i in range(n):
        if T[i] <= 0:
            raise ValueError("task period must be positive")

    cdef i64[::1] order = np.argsort(np.asarray(rank, dtype=np.int64), kind="stable").astype(np.int64)
    cdef i64[::1] next_rel = np.zeros(n, dtype=np.int64)
    cdef i64[::1] next_job = np.zeros(n, dtype=np.int64)
    cdef i64[::1] rem = np.zeros(n, dtype=np.int64)
    cdef i64[::1] rel = np.zeros(n, dtype=np.int64)
    cdef i64[::1] job = np.zeros(n, dtype=np.int64)
    cdef i64[::1] block_start = np.zeros(n, dtype=np.int64)
    cdef cnp.uint8_t[::1] active = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] holds = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] waiting = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] running = np.full(n_cores, -1, dtype=np.int64)
    cdef i64[::1] seg_start = np.zeros(n_cores, dtype=np.int64)
    cdef i64[::1] chosen = np.full(n_cores, -1, dtype=np.int64)
    cdef i64[::1] waiters = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t n_wait = 0, n_still
    cdef list pending = [[] for _ in range(n)]
    cdef u64 held = 0, waitmask = 0, acc, m
    cdef i64 t = 0, nt, r
    cdef bint released_locks

    while True:
        released_locks = False
        for c in range(n_cores):
            i = running[c]
            if i >= 0 and rem[i] == 0:
                segments.append((c, i, job[i], seg_start[c], t, EXEC))
                running[c] = -1
                completions.append((i, job[i], t))
                if t > rel[i] + D[i]:
                    misses.append((i, job[i], rel[i], rel[i] + D[i]))
                active[i] = 0
                if holds[i]:
                    holds[i] = 0
                    held &= ~M[i]
                    released_locks = True
                if pending[i]:
                    j, r = pending[i].pop(0)
                    active[i] = 1
                    job[i] = j
                    rel[i] = r
                    rem[i] = C[i]
                    releases.append((i, j, r))
        if released_locks and n_wait > 0:
            acc = 0
            n_still = 0
            for k in range(n_wait):
                w = waiters[k]
                m = M[w]
                if (held & m) == 0 and (acc & m) == 0:
                    holds[w] = 1
                    held |= m
                    waiting[w] = 0
                    if t > block_start[w]:
                        segments.append((P[w], w, job[w], block_start[w], t, BLOCKED))
                else:
                    acc |= m
                    waiters[n_still] = w
                    n_still += 1
            n_wait = n_still
            waitmask = acc
        if t >= horizon:
            break

        for i in range(n):
            if next_rel[i] == t:
                j = next_job[i]
                next_job[i] = j + 1
                next_rel[i] = t + T[i]
                if active[i]:
                    if queue_overrun:
                        pending[i].append((j, t))
                    else:
                        misses.append((i, j, t, t + D[i]))
                else:
                    active[i] = 1
                    job[i] = j
                    rel[i] = t
                    rem[i] = C[i]
                    releases.append((i, j, t))

        for c in range(n_cores):
            chosen[c] = -1
        for k in range(n):
            i = order[k]
            if not active[i] or waiting[i]:
                continue
            c = P[i]
            if chosen[c] >= 0:
                continue
            m = M[i]
            if m == 0 or holds[i]:
                chosen[c] = i
            elif (held & m) == 0 and (waitmask & m) == 0:
                holds[i] = 1
                held |= m
                chosen[c] = i
            else:
                waiting[i] = 1
                block_start[i] = t
                waiters[n_wait] = i
                n_wait += 1
                waitmask |= m
        for c in range(n_cores):
            if chosen[c] != running[c]:
                i = running[c]
                if i >= 0 and t > seg_start[c]:
                    segments.append((c, i, job[i], seg_start[c], t, EXEC))
                running[c] = chosen[c]
                seg_start[c] = t

        nt = horizon
        for i in range(n):
            if next_rel[i] < nt:
                nt = next_rel[i]
        for c in range(n_cores):
            i = running[c]
            if i >= 0 and t + rem[i] < nt:
                nt = t + rem[i]
        for c in range(n_cores):
            i = running[c]
            if i >= 0:
                rem[i] -= nt - t
        t = nt

    for c in range(n_cores):
        i = running[c]
        if i >= 0 and t > seg_start[c]:
            segments.append((c, i, job[i], seg_start[c], t, EXEC))
    for k in range(n_wait):
        w = waiters[k]
        if t > block_start[w]:
            segments.append((P[w], w, job[w], block_start[w], t, BLOCKED))
    for i in range(n):
        if active[i] and rel[i] + D[i] <= horizon:
            misses.append((i, job[i], rel[i], rel[i] + D[i]))
        for j, r in pending[i]:
            if r + D[i] <= horizon:
                misses.append((i, j, r, r + D[i]))
    return segments, releases, completions, misses


def integrate_plant(double[::1] state, double cmd, const double[::1] lead_speed,
                    double dt, double tau, Py_ssize_t start, Py_ssize_t stop,
                    double[::1] host_pos, double[::1] host_speed,
                    double[::1] lead_pos, double[::1] applied):
    cdef double hp = state[0], hv = state[1], lp = state[2], a = state[3]
    cdef double gain = 1.0 if tau <= dt else dt / tau
    cdef Py_ssize_t k
    for k in range(start, stop):
        host_pos[k] = hp
        host_speed[k] = hv
        lead_pos[k] = lp
        applied[k] = a
        a = a + gain * (cmd - a)
        hp = hp + dt * hv
        lp = lp + dt * lead_speed[k]
        hv = hv + dt * a
        if hv < 0.0:
            hv = 0.0
    state[0] = hp
    state[1] = hv
    state[2] = lp
    state[3] = a
