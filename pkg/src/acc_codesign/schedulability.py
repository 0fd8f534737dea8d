"""Partitioned rate-monotonic / fixed-priority schedulability analysis.

Utilization and Liu & Layland checks per processor, best-fit-decreasing
allocation, minimum common period search, response-time analysis and an
exact event-driven schedule simulation with cross-core shared-data locking.
Times are integer microseconds throughout.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from . import _kernels
from .model import TaskSet, TaskSpec

FEASIBLE = "feasible_by_bound"
INCONCLUSIVE = "inconclusive"
OVERLOADED = "overloaded"


def ll_bound(n: int) -> float:
    """Liu & Layland utilization bound ``n (2^(1/n) - 1)``."""
    if n < 1:
        raise ValueError("ll_bound needs at least one task")
    # expm1 keeps precision for large n where 2**(1/n) - 1 cancels
    return n * math.expm1(math.log(2.0) / n)


def _require_bound(task_set: TaskSet):
    unbound = [t.name for t in task_set if t.processor is None]
    if unbound:
        raise ValueError(f"tasks not bound to a processor: {', '.join(unbound)}")


def utilization(task_set: TaskSet) -> dict[str, Fraction]:
    """Exact per-processor utilization ``sum(C/T)``."""
    _require_bound(task_set)
    out = {p: Fraction(0) for p in task_set.processors}
    for t in task_set:
        out[t.processor] += Fraction(t.exec_time, t.period)
    return out


@dataclass(frozen=True)
class FeasibilityVerdict:
    processor: str
    n_tasks: int
    utilization: Fraction
    ll_bound: float
    status: str

    def as_dict(self) -> dict:
        return {
            "processor": self.processor,
            "n_tasks": self.n_tasks,
            "utilization": float(self.utilization),
            "ll_bound": self.ll_bound,
            "status": self.status,
        }


def classify(u, n: int) -> tuple[float, str]:
    bound = ll_bound(n) if n else 1.0
    if u > 1:
        return bound, OVERLOADED
    if u <= bound:
        return bound, FEASIBLE
    return bound, INCONCLUSIVE


def ll_feasible(task_set: TaskSet) -> list[FeasibilityVerdict]:
    utils = utilization(task_set)
    verdicts = []
    for proc in task_set.processors:
        n = len(task_set.on(proc))
        bound, status = classify(utils[proc], n)
        verdicts.append(FeasibilityVerdict(proc, n, utils[proc], bound, status))
    return verdicts


def min_feasible_period(task_set: TaskSet, granularity: int) -> int:
    """Smallest multiple of ``granularity`` that, used as the common period of
    every task, keeps each processor within its Liu & Layland bound."""
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    _require_bound(task_set)
    best = granularity
    for proc in task_set.processors:
        tasks = task_set.on(proc)
        if not tasks:
            continue
        total = sum(t.exec_time for t in tasks)
        bound = ll_bound(len(tasks))
        k = max(1, math.ceil(total / bound / granularity))
        while total / (k * granularity) > bound:
            k += 1
        while k > 1 and total / ((k - 1) * granularity) <= bound:
            k -= 1
        best = max(best, k * granularity)
    return best


@dataclass
class AllocationResult:
    binding: dict[str, str]
    rejected: list[str] = field(default_factory=list)

    def apply(self, task_set: TaskSet) -> TaskSet:
        tasks = [replace(t, processor=self.binding[t.name]) if t.name in self.binding else t
                 for t in task_set if t.name not in self.rejected]
        return task_set.with_tasks(tasks)


def best_fit_allocate(tasks, processors, use_bound: bool = True,
                      preload: Optional[dict] = None) -> AllocationResult:
    """Best-fit decreasing partitioning.

    Tasks are taken by decreasing utilization (ties: input order).  Each goes
    to the processor that would have the least remaining capacity after the
    placement, among those where it still fits; with ``use_bound`` a
    processor fits if its resulting utilization stays within
    ``ll_bound(count + 1)``, otherwise within 1.  Ties between processors
    go to the one listed first.  ``preload`` maps processor names to
    already-bound tasks that count toward load.
    """
    processors = list(processors)
    if not processors:
        raise ValueError("need at least one processor")
    load = {p: Fraction(0) for p in processors}
    count = {p: 0 for p in processors}
    for proc, bound_tasks in (preload or {}).items():
        for t in bound_tasks:
            load[proc] += Fraction(t.exec_time, t.period)
            count[proc] += 1
    order = sorted(range(len(tasks)),
                   key=lambda i: (-Fraction(tasks[i].exec_time, tasks[i].period), i))
    result = AllocationResult({})
    for i in order:
        task = tasks[i]
        u = Fraction(task.exec_time, task.period)
        best, best_left = None, None
        for proc in processors:
            cap = ll_bound(count[proc] + 1) if use_bound else 1.0
            new_load = load[proc] + u
            if new_load > cap:
                continue
            left = cap - float(new_load) if use_bound else 1 - new_load
            if best is None or left < best_left:
                best, best_left = proc, left
        if best is None:
            result.rejected.append(task.name)
        else:
            result.binding[task.name] = best
            load[best] += u
            count[best] += 1
    return result


def allocate_unbound(task_set: TaskSet, use_bound: bool = True) -> tuple[TaskSet, AllocationResult]:
    """Best-fit the unbound tasks of ``task_set`` around the bound ones."""
    unbound = [t for t in task_set if t.processor is None]
    preload = {p: task_set.on(p) for p in task_set.processors}
    result = best_fit_allocate(unbound, task_set.processors, use_bound, preload)
    return result.apply(task_set), result


def hyperperiod(task_set) -> int:
    tasks = list(task_set)
    if not tasks:
        raise ValueError("hyperperiod of an empty task set")
    return math.lcm(*(t.period for t in tasks))


def response_time_analysis(task_set) -> dict[str, Optional[int]]:
    """Worst-case response times on one core, no blocking.

    Priorities follow ``task_set.priority_order()`` (ties by declaration
    order, same as the simulator).  ``None`` marks a task whose iteration
    exceeds its deadline.
    """
    procs = {t.processor for t in task_set}
    if len(procs) > 1:
        raise ValueError("response_time_analysis handles one processor at a time")
    tasks = task_set.tasks
    order = task_set.priority_order()
    out: dict[str, Optional[int]] = {}
    for pos, i in enumerate(order):
        task = tasks[i]
        higher = [tasks[j] for j in order[:pos]]
        r = task.exec_time + sum(h.exec_time for h in higher)
        while True:
            if r > task.deadline:
                out[task.name] = None
                break
            nxt = task.exec_time + sum(-(-r // h.period) * h.exec_time for h in higher)
            if nxt == r:
                out[task.name] = r
                break
            r = nxt
    return {tasks[i].name: out[tasks[i].name] for i in range(len(tasks))}


# -- schedule simulation -----------------------------------------------------

@dataclass(frozen=True)
class Segment:
    core: str
    task: str
    job: int
    start: int
    end: int
    kind: str  # "exec" | "blocked"


@dataclass(frozen=True)
class Miss:
    task: str
    job: int
    release: int
    deadline: int


@dataclass
class ScheduleTrace:
    horizon: int
    segments: list[Segment]
    releases: list[tuple[str, int]]
    completions: list[tuple[str, int, int]]
    misses: list[Miss]
    task_set: Optional[TaskSet] = field(default=None, repr=False, compare=False)
    # (task, job, release) for admitted jobs; releases keeps the (task, time) view
    jobs: list[tuple[str, int, int]] = field(default_factory=list, repr=False)

    def exec_segments(self, core: Optional[str] = None):
        return [s for s in self.segments
                if s.kind == "exec" and (core is None or s.core == core)]

    def blocked_segments(self):
        return [s for s in self.segments if s.kind == "blocked"]

    def busy_time(self) -> dict[str, int]:
        out = {p: 0 for p in (self.task_set.processors if self.task_set else ())}
        for s in self.exec_segments():
            out[s.core] = out.get(s.core, 0) + s.end - s.start
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["core", "task", "job", "start_us", "end_us", "kind"])
        for s in self.segments:
            w.writerow([s.core, s.task, s.job, s.start, s.end, s.kind])
        return buf.getvalue()

    def summary(self) -> dict:
        util = {}
        if self.task_set is not None and self.task_set.all_bound:
            util = {p: float(u) for p, u in utilization(self.task_set).items()}
        hp = hyperperiod(self.task_set) if self.task_set and len(self.task_set) else 0
        return {
            "utilization": util,
            "misses": [
                {"task": m.task, "job": m.job, "release_us": m.release, "deadline_us": m.deadline}
                for m in self.misses
            ],
            "hyperperiod_us": hp,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _lock_masks(tasks) -> tuple[list[int], int]:
    items: dict[str, int] = {}
    for t in tasks:
        for d in t.shared_data:
            items.setdefault(d, len(items))
    return [sum(1 << items[d] for d in set(t.shared_data)) for t in tasks], len(items)


def simulate_schedule(task_set: TaskSet, horizon: Optional[int] = None,
                      overrun: str = "drop", backend=None) -> ScheduleTrace:
    """Simulate the partitioned fixed-priority preemptive schedule.

    A job locks all shared data it touches when first dispatched and unlocks
    at completion; a job that cannot lock is blocked (FIFO grants) and its
    core runs the next ready job.  With ``overrun="drop"`` a release while
    the task's previous job is still active is dropped and reported as a
    miss; ``"queue"`` backlogs it instead.  ``horizon`` defaults to one
    hyperperiod.
    """
    _require_bound(task_set)
    if overrun not in ("drop", "queue"):
        raise ValueError(f"unknown overrun policy {overrun!r}")
    tasks = task_set.tasks
    for t in tasks:
        if t.period <= 0:
            raise ValueError(f"task {t.name}: period must be positive")
    if horizon is None:
        horizon = hyperperiod(task_set) if tasks else 0
    masks, n_items = _lock_masks(tasks)
    impl = backend
    if impl is None:
        impl = _kernels._pure if n_items > 64 else _kernels._impl
    rank = [0] * len(tasks)
    for r, i in enumerate(task_set.priority_order()):
        rank[i] = r
    procs = task_set.processors
    core_ix = {p: k for k, p in enumerate(procs)}
    segs, rels, comps, misses = impl.simulate_fp(
        [t.period for t in tasks], [t.exec_time for t in tasks],
        [t.deadline for t in tasks], rank, [core_ix[t.processor] for t in tasks],
        masks, len(procs), int(horizon), overrun == "queue")
    kinds = ("exec", "blocked")
    segments = sorted(
        (Segment(procs[c], tasks[i].name, j, s, e, kinds[k]) for c, i, j, s, e, k in segs),
        key=lambda s: (s.start, core_ix[s.core], s.kind != "exec", s.end, s.task))
    order = {t.name: k for k, t in enumerate(tasks)}
    jobs = sorted(((tasks[i].name, j, r) for i, j, r in rels), key=lambda x: (x[2], order[x[0]], x[1]))
    completions = sorted(((tasks[i].name, j, t) for i, j, t in comps),
                         key=lambda x: (x[2], order[x[0]]))
    miss_list = sorted((Miss(tasks[i].name, j, r, d) for i, j, r, d in misses),
                       key=lambda m: (m.release, order[m.task], m.job))
    return ScheduleTrace(
        horizon=int(horizon),
        segments=segments,
        releases=[(name, r) for name, _, r in jobs],
        completions=completions,
        misses=miss_list,
        task_set=task_set,
        jobs=jobs,
    )
