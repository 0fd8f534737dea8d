"""Pure-Python kernels; reference semantics for the compiled ``_fast`` module.

Both modules expose the same two functions and must return identical results.
"""

EXEC = 0
BLOCKED = 1


def simulate_fp(period, wcet, deadline, rank, core, lockmask, n_cores, horizon,
                queue_overrun=False):
    """Event-driven partitioned fixed-priority preemptive simulation.

    Tasks are given as parallel integer sequences; ``rank`` is the global
    priority rank (0 = most urgent, unique), ``lockmask`` a bit set of the
    shared data items a job locks from dispatch to completion.

    Returns ``(segments, releases, completions, misses)`` where segments are
    ``(core, task, job, start, end, kind)`` tuples, releases ``(task, job,
    time)``, completions ``(task, job, time)`` and misses ``(task, job,
    release, absolute_deadline)``.
    """
    n = len(period)
    segments = []
    releases = []
    completions = []
    misses = []
    if horizon <= 0 or n == 0:
        return segments, releases, completions, misses
    for p in period:
        if p <= 0:
            raise ValueError("task period must be positive")

    order = sorted(range(n), key=lambda i: rank[i])
    next_rel = [0] * n
    next_job = [0] * n
    active = [False] * n
    rem = [0] * n
    rel = [0] * n
    job = [0] * n
    holds = [False] * n
    waiting = [False] * n
    block_start = [0] * n
    pending = [[] for _ in range(n)]
    waiters = []
    waitmask = 0
    held = 0
    running = [-1] * n_cores
    seg_start = [0] * n_cores
    t = 0

    while True:
        # completions due at t
        released_locks = False
        for c in range(n_cores):
            i = running[c]
            if i >= 0 and rem[i] == 0:
                segments.append((c, i, job[i], seg_start[c], t, EXEC))
                running[c] = -1
                completions.append((i, job[i], t))
                if t > rel[i] + deadline[i]:
                    misses.append((i, job[i], rel[i], rel[i] + deadline[i]))
                active[i] = False
                if holds[i]:
                    holds[i] = False
                    held &= ~lockmask[i]
                    released_locks = True
                if pending[i]:
                    j, r = pending[i].pop(0)
                    active[i] = True
                    job[i] = j
                    rel[i] = r
                    rem[i] = wcet[i]
                    releases.append((i, j, r))
        if released_locks and waiters:
            acc = 0
            still = []
            for w in waiters:
                m = lockmask[w]
                if (held & m) == 0 and (acc & m) == 0:
                    holds[w] = True
                    held |= m
                    waiting[w] = False
                    if t > block_start[w]:
                        segments.append((core[w], w, job[w], block_start[w], t, BLOCKED))
                else:
                    acc |= m
                    still.append(w)
            waiters = still
            waitmask = acc
        if t >= horizon:
            break

        # releases due at t
        for i in range(n):
            if next_rel[i] == t:
                j = next_job[i]
                next_job[i] = j + 1
                next_rel[i] = t + period[i]
                if active[i]:
                    if queue_overrun:
                        pending[i].append((j, t))
                    else:
                        misses.append((i, j, t, t + deadline[i]))
                else:
                    active[i] = True
                    job[i] = j
                    rel[i] = t
                    rem[i] = wcet[i]
                    releases.append((i, j, t))

        # dispatch: highest-ranked eligible job per core
        chosen = [-1] * n_cores
        for i in order:
            if not active[i] or waiting[i]:
                continue
            c = core[i]
            if chosen[c] >= 0:
                continue
            m = lockmask[i]
            if m == 0 or holds[i]:
                chosen[c] = i
            elif (held & m) == 0 and (waitmask & m) == 0:
                holds[i] = True
                held |= m
                chosen[c] = i
            else:
                waiting[i] = True
                block_start[i] = t
                waiters.append(i)
                waitmask |= m
        for c in range(n_cores):
            if chosen[c] != running[c]:
                i = running[c]
                if i >= 0 and t > seg_start[c]:
                    segments.append((c, i, job[i], seg_start[c], t, EXEC))
                running[c] = chosen[c]
                seg_start[c] = t

        # advance to the next event
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

    # close open intervals at the horizon
    for c in range(n_cores):
        i = running[c]
        if i >= 0 and t > seg_start[c]:
            segments.append((c, i, job[i], seg_start[c], t, EXEC))
    for w in waiters:
        if t > block_start[w]:
            segments.append((core[w], w, job[w], block_start[w], t, BLOCKED))
    for i in range(n):
        if active[i] and rel[i] + deadline[i] <= horizon:
            misses.append((i, job[i], rel[i], rel[i] + deadline[i]))
        for j, r in pending[i]:
            if r + deadline[i] <= horizon:
                misses.append((i, j, r, r + deadline[i]))
    return segments, releases, completions, misses


def integrate_plant(state, cmd, lead_speed, dt, tau, start, stop,
                    host_pos, host_speed, lead_pos, applied):
    """Advance the two-vehicle point-mass plant from step ``start`` to ``stop``.

    ``state`` is ``[host_pos, host_speed, lead_pos, applied_accel]`` and is
    updated in place.  The state at each step ``k`` is written to the output
    arrays before the step is taken.  The lead speed at step ``k`` is
    ``lead_speed[k]``.
    """
    hp, hv, lp, a = state[0], state[1], state[2], state[3]
    gain = 1.0 if tau <= dt else dt / tau
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
