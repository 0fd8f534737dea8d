"""Adaptive cruise control case study.

Point-mass two-vehicle plant with a first-order actuator lag, a
proportional cruise / linear gap-policy controller with min-arbitration,
the standard set-speed-ramp scenario, the headway requirement checker and
the decomposition of the controller into the ten reference threads.

SI units everywhere (m, m/s, m/s^2, s).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from . import _kernels
from .rt_kernel import Behavior, ConfigurationError

KMH = 1.0 / 3.6


@dataclass(frozen=True)
class ControllerParams:
    headway: float = 1.8  # s, driver-selected time gap h
    standstill_gap: float = 5.0  # m, d0
    k_v: float = 0.4  # 1/s, cruise speed gain
    k_d: float = 0.25  # 1/s^2, gap gain
    k_r: float = 0.3  # 1/s, relative speed gain
    a_min: float = -4.0
    a_max: float = 2.0
    tau: float = 0.3  # s, actuator lag
    radar_range: float = 200.0  # m; beyond it there is no target

    def __post_init__(self):
        if self.headway <= 0:
            raise ValueError("headway must be positive")
        if not self.a_min < 0 < self.a_max:
            raise ValueError("need a_min < 0 < a_max")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


@dataclass(frozen=True)
class Scenario:
    """Constant-speed lead, linear set-speed ramp then hold."""

    lead_speed_mps: float = 60 * KMH
    set_speed_start: float = 60 * KMH
    set_speed_end: float = 120 * KMH
    ramp_start: float = 0.0
    ramp_duration: float = 45.0
    initial_gap: float = 750.0
    initial_host_speed: float = 60 * KMH
    duration: float = 120.0

    def lead_speed(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.lead_speed_mps) \
            if np.ndim(t) else self.lead_speed_mps

    def set_speed(self, t):
        frac = np.clip((np.asarray(t, dtype=float) - self.ramp_start) / self.ramp_duration, 0.0, 1.0) \
            if self.ramp_duration > 0 else (np.asarray(t, dtype=float) >= self.ramp_start) * 1.0
        v = self.set_speed_start + frac * (self.set_speed_end - self.set_speed_start)
        return v if np.ndim(t) else float(v)


def standard_scenario() -> Scenario:
    return Scenario()


@dataclass
class VehicleState:
    host_pos: float
    host_speed: float
    lead_pos: float
    lead_speed: float
    applied_accel: float = 0.0

    @property
    def rel_dist(self) -> float:
        return self.lead_pos - self.host_pos


# -- control law -------------------------------------------------------------

def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def cruise_accel(v_host, v_set, p: ControllerParams) -> float:
    return p.k_v * (v_set - v_host)


def follow_accel(rel_dist, v_lead, v_host, p: ControllerParams) -> float:
    desired = p.standstill_gap + p.headway * v_host
    return p.k_d * (rel_dist - desired) + p.k_r * (v_lead - v_host)


def acc_step(rel_dist: float, v_lead: float, v_host: float, v_set: float,
             params: ControllerParams) -> float:
    """Commanded acceleration: ``clamp(min(cruise, follow))``, or cruise only
    when the lead is beyond radar range."""
    a = cruise_accel(v_host, v_set, params)
    if rel_dist <= params.radar_range:
        a = min(a, follow_accel(rel_dist, v_lead, v_host, params))
    return clamp(a, params.a_min, params.a_max)


def plant_step(state: VehicleState, command: float, params: ControllerParams, dt: float,
               lead_speed: Optional[float] = None) -> VehicleState:
    """One explicit-Euler step of the point-mass plant.

    The lead keeps ``lead_speed`` (scenario value) if given, else its current
    speed.  Positions integrate the speeds held at the start of the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    gain = 1.0 if params.tau <= dt else dt / params.tau
    a = state.applied_accel + gain * (command - state.applied_accel)
    v_lead = state.lead_speed if lead_speed is None else lead_speed
    return VehicleState(
        host_pos=state.host_pos + dt * state.host_speed,
        host_speed=max(0.0, state.host_speed + dt * a),
        lead_pos=state.lead_pos + dt * state.lead_speed,
        lead_speed=v_lead,
        applied_accel=a,
    )


class PointMassPlant:
    """Plant driver for the co-simulation kernel (``rt_kernel.run_cosim``)."""

    command_slot = "cmd_accel"
    measurement_keys = ("meas_rel_dist", "meas_lead_speed", "meas_host_speed", "meas_set_speed")

    def __init__(self, params: ControllerParams = ControllerParams()):
        self.params = params

    def begin(self, scenario: Scenario, n_steps: int, dt: float):
        self.dt = dt
        self.scenario = scenario
        t = np.arange(n_steps) * dt
        self.lead_speed = np.ascontiguousarray(scenario.lead_speed(t), dtype=float)
        self.set_speed = np.ascontiguousarray(scenario.set_speed(t), dtype=float)
        self.host_pos = np.zeros(n_steps)
        self.host_speed = np.zeros(n_steps)
        self.lead_pos = np.zeros(n_steps)
        self.applied = np.zeros(n_steps)
        self.state = np.array([0.0, scenario.initial_host_speed, scenario.initial_gap, 0.0])

    def initial_slots(self) -> dict:
        s = self.scenario
        v_lead = float(s.lead_speed(0.0))
        return {
            "rel_dist": s.initial_gap,
            "lead_speed": v_lead,
            "host_speed": s.initial_host_speed,
            "set_speed": float(s.set_speed(0.0)),
            "track_dist": s.initial_gap,
            "track_lead_speed": v_lead,
            "target_valid": s.initial_gap <= self.params.radar_range,
            "a_follow": math.inf,
            "a_cruise": 0.0,
            "a_req": 0.0,
            "cmd_accel": 0.0,
            "diag_saturated": False,
        }

    def measure(self, k: int) -> dict:
        hp, hv, lp, _ = self.state
        return {
            "meas_rel_dist": lp - hp,
            "meas_lead_speed": float(self.lead_speed[k]) if k < len(self.lead_speed)
            else self.scenario.lead_speed_mps,
            "meas_host_speed": hv,
            "meas_set_speed": float(self.set_speed[k]) if k < len(self.set_speed)
            else float(self.scenario.set_speed(k * self.dt)),
        }

    def advance(self, command: float, k0: int, k1: int):
        _kernels.integrate_plant(self.state, float(command), self.lead_speed, self.dt,
                                 self.params.tau, k0, k1, self.host_pos, self.host_speed,
                                 self.lead_pos, self.applied)

    def arrays(self) -> dict:
        return {
            "host_pos": self.host_pos,
            "lead_pos": self.lead_pos,
            "host_speed": self.host_speed,
            "lead_speed": self.lead_speed,
            "applied_accel": self.applied,
            "set_speed": self.set_speed,
        }


# -- requirement -------------------------------------------------------------

@dataclass
class RequirementReport:
    min_margin: float
    violations: list[tuple[float, float]]
    verdict: str  # "pass" | "fail"
    transient_cutoff: float
    collision: bool = False
    min_margin_time: float = 0.0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "min_margin_m": self.min_margin,
            "min_margin_time_s": self.min_margin_time,
            "violations": [list(v) for v in self.violations],
            "verdict": self.verdict,
            "transient_cutoff_s": self.transient_cutoff,
            "collision": self.collision,
        }


def headway_threshold(v_host, params: ControllerParams, fraction: float = 0.9):
    return fraction * params.headway * np.asarray(v_host)


def check_headway(trace, params: ControllerParams, transient_cutoff: float = 5.0,
                  fraction: float = 0.9) -> RequirementReport:
    """Check ``rel_dist >= 0.9 * h * v_host`` on every sample after the cutoff."""
    t = np.asarray(trace.t)
    if t.size == 0:
        raise ValueError("empty trace")
    rel = np.asarray(trace.rel_dist)
    margin = rel - headway_threshold(trace.host_speed, params, fraction)
    mask = t >= transient_cutoff
    violations = []
    dt = float(t[1] - t[0]) if t.size > 1 else 0.0
    bad = mask & (margin < 0)
    start = None
    for k in range(t.size):
        if bad[k] and start is None:
            start = float(t[k])
        elif not bad[k] and start is not None:
            violations.append((start, float(t[k])))
            start = None
    if start is not None:
        violations.append((start, float(t[-1]) + dt))
    if mask.any():
        idx = int(np.argmin(np.where(mask, margin, np.inf)))
        min_margin = float(margin[idx])
        at = float(t[idx])
    else:
        min_margin, at = math.inf, 0.0
    collision = bool((rel < 0).any())
    verdict = "pass" if not violations and not collision else "fail"
    return RequirementReport(min_margin, violations, verdict, transient_cutoff, collision, at)


# -- thread behaviours -------------------------------------------------------

ROLES = (
    "sense_radar", "sense_speed", "driver_input", "track_filter", "mode_logic",
    "gap_ctrl", "cruise_ctrl", "arbiter", "actuator_out", "diagnostics",
)


def role_behaviors(params: ControllerParams) -> dict[str, Behavior]:
    p = params

    def sense_radar(s):
        return {"rel_dist": s["meas_rel_dist"], "lead_speed": s["meas_lead_speed"]}

    def sense_speed(s):
        return {"host_speed": s["meas_host_speed"]}

    def driver_input(s):
        return {"set_speed": s["meas_set_speed"]}

    def track_filter(s):
        return {"track_dist": s["rel_dist"], "track_lead_speed": s["lead_speed"]}

    def mode_logic(s):
        return {"target_valid": s["track_dist"] <= p.radar_range}

    def gap_ctrl(s):
        return {"a_follow": follow_accel(s["track_dist"], s["track_lead_speed"], s["host_speed"], p)}

    def cruise_ctrl(s):
        return {"a_cruise": cruise_accel(s["host_speed"], s["set_speed"], p)}

    def arbiter(s):
        a = s["a_cruise"]
        if s["target_valid"]:
            a = min(a, s["a_follow"])
        return {"a_req": clamp(a, p.a_min, p.a_max)}

    def actuator_out(s):
        return {"cmd_accel": s["a_req"]}

    def diagnostics(s):
        return {"diag_saturated": s["cmd_accel"] in (p.a_min, p.a_max)}

    return {
        "sense_radar": Behavior(sense_radar, ("meas_rel_dist", "meas_lead_speed"),
                                ("rel_dist", "lead_speed")),
        "sense_speed": Behavior(sense_speed, ("meas_host_speed",), ("host_speed",)),
        "driver_input": Behavior(driver_input, ("meas_set_speed",), ("set_speed",)),
        "track_filter": Behavior(track_filter, ("rel_dist", "lead_speed"),
                                 ("track_dist", "track_lead_speed")),
        "mode_logic": Behavior(mode_logic, ("track_dist",), ("target_valid",)),
        "gap_ctrl": Behavior(gap_ctrl, ("track_dist", "track_lead_speed", "host_speed"),
                             ("a_follow",)),
        "cruise_ctrl": Behavior(cruise_ctrl, ("host_speed", "set_speed"), ("a_cruise",)),
        "arbiter": Behavior(arbiter, ("a_cruise", "a_follow", "target_valid"), ("a_req",)),
        "actuator_out": Behavior(actuator_out, ("a_req",), ("cmd_accel",)),
        "diagnostics": Behavior(diagnostics, ("cmd_accel", "host_speed"), ("diag_saturated",)),
    }


def bind_behaviors(task_set, params: ControllerParams = ControllerParams()) -> dict[str, Behavior]:
    """Map every task of ``task_set`` to its role behaviour."""
    roles = role_behaviors(params)
    unknown = [t.name for t in task_set if t.name not in roles]
    if unknown:
        raise ConfigurationError(f"no behaviour for task(s): {', '.join(unknown)}")
    return {t.name: roles[t.name] for t in task_set}


# -- key = value config files ------------------------------------------------

def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"line {lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def _apply_kv(obj, text: str):
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, value in _parse_kv(text).items():
        if key not in known:
            raise ValueError(f"unknown key {key!r}")
        updates[key] = None if value.lower() == "none" else float(value)
    return replace(obj, **updates)


def load_params(path=None, text: Optional[str] = None) -> ControllerParams:
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return _apply_kv(ControllerParams(), text or "")


def load_scenario(path=None, text: Optional[str] = None) -> Scenario:
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return _apply_kv(standard_scenario(), text or "")


def dump_kv(obj) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in asdict(obj).items())
