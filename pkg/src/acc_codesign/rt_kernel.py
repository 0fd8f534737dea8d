"""Co-simulation of a scheduled task set with a sampled physical plant.

Jobs snapshot the blackboard when they start executing and publish their
outputs when they complete; the plant advances on a fixed step using the
actuator command committed most recently.  Execution times are fixed, so
the schedule does not depend on data: it is computed once by
``schedulability.simulate_schedule`` and then replayed against the plant.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .model import TaskSet
from .schedulability import ScheduleTrace, simulate_schedule


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Behavior:
    """Task-step function with its declared blackboard reads and writes."""

    fn: Callable[[dict], dict]
    reads: tuple[str, ...] = ()
    writes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SimConfig:
    plant_step: int = 1000  # us
    horizon: int = 120_000_000  # us
    period_override: Optional[int] = None  # us, applied to every task
    overrun: str = "drop"  # or "queue"

    def __post_init__(self):
        if self.plant_step <= 0:
            raise ConfigurationError("plant step must be positive")
        if self.horizon < 0:
            raise ConfigurationError("horizon must be non-negative")
        if self.overrun not in ("drop", "queue"):
            raise ConfigurationError(f"unknown overrun policy {self.overrun!r}")


class Blackboard:
    """Named value slots.  Each slot also remembers the sensing time of the
    freshest sensor sample behind its value (``stamp``) and the job that
    wrote it."""

    def __init__(self, initial: dict):
        self.values = dict(initial)
        self.stamps: dict[str, Optional[int]] = {k: None for k in initial}
        self.writers: dict[str, Optional[tuple[str, int, int]]] = {k: None for k in initial}

    def snapshot(self, keys):
        missing = [k for k in keys if k not in self.values]
        if missing:
            raise ConfigurationError(f"unknown blackboard slot(s): {', '.join(missing)}")
        return ({k: self.values[k] for k in keys},
                {k: self.stamps[k] for k in keys},
                {k: self.writers[k] for k in keys})

    def commit(self, outputs: dict, stamp, writer):
        for k, v in outputs.items():
            self.values[k] = v
            self.stamps[k] = stamp
            self.writers[k] = writer


@dataclass
class JobRecord:
    task: str
    job: int
    dispatch: int  # us
    completion: Optional[int]  # us; None if not finished within the horizon
    stamp: Optional[int]  # freshest sensor time feeding the job's inputs
    read_from: dict = field(default_factory=dict)  # slot -> (task, job, commit time)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


@dataclass
class SimTrace:
    t: np.ndarray  # s
    host_speed: np.ndarray
    lead_speed: np.ndarray
    rel_dist: np.ndarray
    cmd_accel: np.ndarray
    applied_accel: np.ndarray
    set_speed: np.ndarray
    host_pos: np.ndarray
    lead_pos: np.ndarray
    schedule: Optional[ScheduleTrace]
    jobs: list[JobRecord]
    # (commit time us, sensor stamp us, task, job) for every actuator commit
    actuations: list[tuple[int, Optional[int], str, int]]
    plant_step: int

    def __len__(self):
        return len(self.t)

    CSV_COLUMNS = ("t_s", "host_speed_mps", "lead_speed_mps", "rel_dist_m",
                   "cmd_accel_mps2", "applied_accel_mps2", "set_speed_mps")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        cols = (self.t, self.host_speed, self.lead_speed, self.rel_dist,
                self.cmd_accel, self.applied_accel, self.set_speed)
        for row in zip(*(c.tolist() for c in cols)):
            w.writerow([repr(x) for x in row])
        return buf.getvalue()


def apply_period_override(task_set: TaskSet, period: int) -> TaskSet:
    """Give every task the same period (and implicit deadline).

    Execution times are kept; rate-monotonic priorities follow from the new
    periods automatically.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    tasks = [t if (t.period == period and t.deadline == period)
             else replace(t, period=period, deadline=period) for t in task_set]
    return task_set.with_tasks(tasks)


def _quantize(task_set: TaskSet, step: int) -> TaskSet:
    for t in task_set:
        if t.period % step:
            raise ConfigurationError(
                f"plant step {step} us does not divide the period of {t.name} ({t.period} us)")
    return task_set.with_tasks(
        replace(t, exec_time=-(-t.exec_time // step) * step,
                deadline=-(-t.deadline // step) * step)
        for t in task_set)


def _check_behaviors(task_set, behaviors):
    missing = [t.name for t in task_set if t.name not in behaviors]
    if missing:
        raise ConfigurationError(f"missing behaviour for task(s): {', '.join(missing)}")
    writer_of = {}
    for t in task_set:
        for slot in behaviors[t.name].writes:
            if slot in writer_of:
                raise ConfigurationError(
                    f"slot {slot!r} written by both {writer_of[slot]} and {t.name}")
            writer_of[slot] = t.name


def _topological(task_set, behaviors) -> list[str]:
    """Task names in dataflow order (writers before readers), ties by
    declaration order; tasks on a cycle keep declaration order."""
    names = [t.name for t in task_set]
    writer = {s: n for n in names for s in behaviors[n].writes}
    deps = {n: {writer[s] for s in behaviors[n].reads if s in writer and writer[s] != n}
            for n in names}
    order, done = [], set()
    while len(order) < len(names):
        ready = [n for n in names if n not in done and deps[n] <= done]
        if not ready:
            ready = [next(n for n in names if n not in done)]
        order.append(ready[0])
        done.add(ready[0])
    return order


def run_cosim(task_set: TaskSet, behaviors: dict, plant, scenario,
              config: SimConfig = SimConfig()) -> SimTrace:
    """Co-simulate ``task_set`` (with timing) against ``plant``."""
    ts = task_set
    if config.period_override is not None:
        ts = apply_period_override(ts, config.period_override)
    _check_behaviors(ts, behaviors)
    step = config.plant_step
    ts = _quantize(ts, step)
    schedule = simulate_schedule(ts, config.horizon, overrun=config.overrun)

    decl = {t.name: k for k, t in enumerate(ts)}
    first_exec: dict[tuple[str, int], int] = {}
    for seg in schedule.segments:
        if seg.kind == "exec":
            key = (seg.task, seg.job)
            if key not in first_exec or seg.start < first_exec[key]:
                first_exec[key] = seg.start
    done = {(name, job): t for name, job, t in schedule.completions}
    events = []
    for (name, job), start in first_exec.items():
        events.append((start, 1, decl[name], name, job))
        if (name, job) in done:
            events.append((done[(name, job)], 0, decl[name], name, job))
    events.sort()
    return _replay(events, ts, behaviors, plant, scenario, config, schedule)


def run_instant(task_set: TaskSet, behaviors: dict, plant, scenario,
                config: SimConfig = SimConfig()) -> SimTrace:
    """Reference run without timing effects: at each release the released
    tasks execute in dataflow order in zero time."""
    ts = task_set
    if config.period_override is not None:
        ts = apply_period_override(ts, config.period_override)
    _check_behaviors(ts, behaviors)
    for t in ts:
        if t.period % config.plant_step:
            raise ConfigurationError(f"plant step does not divide the period of {t.name}")
    rank = {n: k for k, n in enumerate(_topological(ts, behaviors))}
    events = []
    for t in ts:
        for job, r in enumerate(range(0, config.horizon, t.period)):
            events.append((r, 2, rank[t.name], t.name, job))
    events.sort()
    return _replay(events, ts, behaviors, plant, scenario, config, None)


def _replay(events, ts, behaviors, plant, scenario, config, schedule) -> SimTrace:
    step = config.plant_step
    n_steps = config.horizon // step
    dt = step * 1e-6
    plant.begin(scenario, n_steps, dt)
    board = Blackboard(plant.initial_slots())
    measured = set(getattr(plant, "measurement_keys", ()))
    cmd_slot = plant.command_slot
    cmd = np.zeros(n_steps)
    jobs: dict[tuple[str, int], JobRecord] = {}
    actuations = []

    def dispatch(name, job, now, k):
        beh = behaviors[name]
        board_keys = [s for s in beh.reads if s not in measured]
        values, stamps, writers = board.snapshot(board_keys)
        stamp_vals = [s for s in stamps.values() if s is not None]
        if any(s in measured for s in beh.reads):
            meas = plant.measure(k)
            values.update({s: meas[s] for s in beh.reads if s in measured})
            stamp_vals.append(now)
        rec = JobRecord(name, job, now, None, max(stamp_vals) if stamp_vals else None,
                        read_from=writers, inputs=dict(values))
        rec.outputs = dict(beh.fn(values))
        extra = set(rec.outputs) - set(beh.writes)
        if extra:
            raise ConfigurationError(f"{name} wrote undeclared slot(s) {sorted(extra)}")
        jobs[(name, job)] = rec
        return rec

    def complete(rec, now):
        rec.completion = now
        board.commit(rec.outputs, rec.stamp, (rec.task, rec.job, now))
        if cmd_slot in rec.outputs:
            actuations.append((now, rec.stamp, rec.task, rec.job))

    e = 0
    k = 0
    n_ev = len(events)
    while k < n_steps:
        now = k * step
        while e < n_ev and events[e][0] <= now:
            t_ev, phase, _, name, job = events[e]
            if t_ev != now:
                raise ConfigurationError("event off the plant-step grid")
            if phase == 1:
                dispatch(name, job, now, k)
            elif phase == 0:
                complete(jobs[(name, job)], now)
            else:
                complete(dispatch(name, job, now, k), now)
            e += 1
        nxt = events[e][0] if e < n_ev else config.horizon
        k_next = min(n_steps, max(k + 1, -(-nxt // step)))
        command = board.values[cmd_slot]
        cmd[k:k_next] = command
        plant.advance(command, k, k_next)
        k = k_next

    arrays = plant.arrays()
    t = np.arange(n_steps) * dt
    return SimTrace(
        t=t,
        host_speed=arrays["host_speed"],
        lead_speed=arrays["lead_speed"],
        rel_dist=arrays["lead_pos"] - arrays["host_pos"],
        cmd_accel=cmd,
        applied_accel=arrays["applied_accel"],
        set_speed=arrays["set_speed"],
        host_pos=arrays["host_pos"],
        lead_pos=arrays["lead_pos"],
        schedule=schedule,
        jobs=sorted(jobs.values(), key=lambda r: (r.dispatch, r.task, r.job)),
        actuations=actuations,
        plant_step=step,
    )


@dataclass(frozen=True)
class LatencyStats:
    count: int
    min_ms: float
    mean_ms: float
    max_ms: float

    def as_dict(self) -> dict:
        return {"count": self.count, "min_ms": self.min_ms, "mean_ms": self.mean_ms,
                "max_ms": self.max_ms}


def sensor_to_actuator_latency(trace: SimTrace) -> LatencyStats:
    """Actuator commit time minus the sensing time of the freshest sensor
    sample that fed the committed command, over all control cycles."""
    lat = [(c - s) / 1000.0 for c, s, _, _ in trace.actuations if s is not None]
    if not lat:
        raise ValueError("trace has no sensor-driven actuator commits")
    return LatencyStats(len(lat), min(lat), math.fsum(lat) / len(lat), max(lat))
