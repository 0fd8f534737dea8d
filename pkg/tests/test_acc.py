from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acc_codesign import acc
from acc_codesign.acc import (KMH, ControllerParams, Scenario, VehicleState, acc_step,
                              bind_behaviors, check_headway, plant_step, standard_scenario)
from acc_codesign.model import TaskSet, TaskSpec
from acc_codesign.rt_kernel import ConfigurationError, SimConfig, run_cosim, run_instant

P = ControllerParams()
FAR = 1e6  # beyond radar range


# -- control law -------------------------------------------------------------

def test_cruise_at_set_speed_no_lead():
    assert acc_step(FAR, 0.0, 20.0, 20.0, P) == 0.0


def test_follow_term_zero_at_desired_gap():
    v = 18.0
    gap = P.standstill_gap + P.headway * v
    assert acc.follow_accel(gap, v, v, P) == 0.0


def test_cruise_clamped_to_a_max():
    p = ControllerParams(k_v=0.5)
    assert acc_step(FAR, 0.0, 16.67, 33.33, p) == 2.0


def test_follow_limits_command():
    # lead close and slower: the follow branch wins and brakes hard
    assert acc_step(10.0, 10.0, 25.0, 33.0, P) == P.a_min


def test_params_validation():
    with pytest.raises(ValueError):
        ControllerParams(headway=0)
    with pytest.raises(ValueError):
        ControllerParams(a_min=1.0)
    with pytest.raises(ValueError):
        ControllerParams(tau=-1)


finite = st.floats(min_value=0.0, max_value=400.0, allow_nan=False)
speed = st.floats(min_value=0.0, max_value=60.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite, finite, speed, speed, speed)
def test_monotone_in_distance(d1, d2, v_lead, v_host, v_set):
    lo, hi = sorted((d1, d2))
    assert acc_step(lo, v_lead, v_host, v_set, P) <= acc_step(hi, v_lead, v_host, v_set, P)


@settings(max_examples=300, deadline=None)
@given(finite, speed, speed, speed)
def test_command_within_limits(d, v_lead, v_host, v_set):
    a = acc_step(d, v_lead, v_host, v_set, P)
    assert P.a_min <= a <= P.a_max


# -- plant -------------------------------------------------------------------

def test_zero_command_keeps_speeds():
    s = VehicleState(0.0, 12.0, 30.0, 12.0)
    for dt in (1e-3, 0.01, 1.0):
        nxt = plant_step(s, 0.0, ControllerParams(tau=0.0), dt)
        assert (nxt.host_speed, nxt.lead_speed) == (12.0, 12.0)


def test_constant_accel_euler_sum():
    p = ControllerParams(tau=0.0)
    s = VehicleState(0.0, 0.0, 0.0, 0.0)
    for _ in range(1000):
        s = plant_step(s, 1.0, p, 1e-3)
    # 1000 * 0.001 in binary floating point
    assert s.host_speed == pytest.approx(1.0, abs=1e-12)


def test_rel_dist_derivative():
    p = ControllerParams()
    s = VehicleState(0.0, 20.0, 60.0, 15.0)
    dt = 1e-3
    for k in range(2000):
        nxt = plant_step(s, -2.0 if k < 1000 else 1.5, p, dt, lead_speed=15.0)
        assert abs((nxt.rel_dist - s.rel_dist) / dt - (s.lead_speed - s.host_speed)) < 1e-9
        s = nxt


def test_first_order_lag():
    p = ControllerParams(tau=0.3)
    s = plant_step(VehicleState(0, 10, 50, 10), 1.0, p, 0.01)
    assert s.applied_accel == pytest.approx(0.01 / 0.3)
    # tau below the step means the command applies directly
    s = plant_step(VehicleState(0, 10, 50, 10), 1.0, ControllerParams(tau=0.001), 0.01)
    assert s.applied_accel == 1.0


def test_speed_never_negative():
    s = VehicleState(0.0, 0.5, 10.0, 0.0)
    for _ in range(100):
        s = plant_step(s, -4.0, ControllerParams(tau=0.0), 0.01)
        assert s.host_speed >= 0.0


def test_plant_conservation_long_horizon():
    p = ControllerParams(tau=0.0)
    plant = acc.PointMassPlant(p)
    sc = Scenario(lead_speed_mps=16.0, initial_host_speed=16.0)
    n = 200_000
    plant.begin(sc, n, 1e-3)
    plant.advance(0.0, 0, n)
    arr = plant.arrays()
    assert np.all(arr["host_speed"] == 16.0)


def test_plant_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        plant_step(VehicleState(0, 0, 0, 0), 0.0, P, 0.0)


# -- scenario ----------------------------------------------------------------

def test_standard_scenario():
    sc = standard_scenario()
    assert sc.set_speed(0.0) == pytest.approx(16.667, abs=1e-3)
    assert sc.set_speed(45.0) == pytest.approx(33.333, abs=1e-3)
    assert sc.set_speed(100.0) == pytest.approx(120 * KMH)
    assert sc.set_speed(22.5) == pytest.approx(90 * KMH)
    t = np.linspace(0, sc.duration, 7)
    assert np.all(sc.lead_speed(t) == pytest.approx(16.667, abs=1e-3))
    assert sc.initial_host_speed == pytest.approx(60 * KMH)
    assert sc.duration == 120.0


# -- requirement -------------------------------------------------------------

def fake_trace(t, rel, v_host):
    return SimpleNamespace(t=np.asarray(t, float), rel_dist=np.asarray(rel, float),
                           host_speed=np.asarray(v_host, float))


def test_headway_pass_example():
    p = ControllerParams(headway=1.8)
    rep = check_headway(fake_trace([10.0], [28.0], [16.67]), p)
    assert acc.headway_threshold(16.67, p) == pytest.approx(27.0, abs=0.01)
    assert rep.min_margin == pytest.approx(1.0, abs=0.01)
    assert rep.verdict == "pass"


def test_headway_zero_speed_passes():
    rep = check_headway(fake_trace(np.arange(10.0), np.full(10, 0.5), np.zeros(10)), P)
    assert rep.passed and rep.min_margin == 0.5


def test_headway_violation_example():
    rep = check_headway(fake_trace([10.0], [30.0], [20.0]), ControllerParams(headway=1.8))
    assert rep.min_margin == pytest.approx(-2.4)
    assert rep.verdict == "fail"
    assert rep.violations == [(10.0, 10.0)]


def test_transient_excluded():
    t = np.arange(0.0, 10.0, 1.0)
    rel = np.where(t < 5, 1.0, 100.0)
    rep = check_headway(fake_trace(t, rel, np.full(10, 20.0)), P, transient_cutoff=5.0)
    assert rep.passed
    rep = check_headway(fake_trace(t, rel, np.full(10, 20.0)), P, transient_cutoff=2.0)
    assert rep.violations == [(2.0, 5.0)]


def test_collision_fails():
    rep = check_headway(fake_trace([0.0, 1.0], [1.0, -0.1], [0.0, 0.0]), P)
    assert rep.collision and not rep.passed


def test_empty_trace_rejected():
    with pytest.raises(ValueError):
        check_headway(fake_trace([], [], []), P)


# -- behaviours --------------------------------------------------------------

def test_role_names_cover_reference(dual_ts):
    beh = bind_behaviors(dual_ts, P)
    assert set(beh) == set(acc.ROLES) == {t.name for t in dual_ts}


def test_unknown_task_rejected():
    ts = TaskSet([TaskSpec("mystery", 40_000, 1000, processor="P")], ("P",))
    with pytest.raises(ConfigurationError, match="mystery"):
        bind_behaviors(ts, P)


def test_missing_gap_ctrl_is_configuration_error(dual_ts):
    beh = bind_behaviors(dual_ts, P)
    del beh["gap_ctrl"]
    with pytest.raises(ConfigurationError, match="gap_ctrl"):
        run_cosim(dual_ts, beh, acc.PointMassPlant(P), standard_scenario())


def test_instant_pipeline_equals_acc_step(dual_ts):
    sc = Scenario(initial_gap=60.0)
    tr = run_instant(dual_ts, bind_behaviors(dual_ts, P), acc.PointMassPlant(P), sc,
                     SimConfig(horizon=20_000_000))
    jobs = {(j.task, j.job): j for j in tr.jobs}
    checked = 0
    for (task, k), job in jobs.items():
        if task != "actuator_out":
            continue
        radar = jobs[("sense_radar", k)].inputs
        host = jobs[("sense_speed", k)].inputs["meas_host_speed"]
        v_set = jobs[("driver_input", k)].inputs["meas_set_speed"]
        expected = acc_step(radar["meas_rel_dist"], radar["meas_lead_speed"], host, v_set, P)
        assert job.outputs["cmd_accel"] == expected
        checked += 1
    assert checked == 500


@pytest.fixture(scope="module")
def reference_run(dual_ts):
    return run_instant(dual_ts, bind_behaviors(dual_ts, P), acc.PointMassPlant(P),
                       standard_scenario(), SimConfig())


def test_steady_state_gap(reference_run):
    target = P.standstill_gap + P.headway * standard_scenario().lead_speed_mps
    assert reference_run.rel_dist[-1] == pytest.approx(target, rel=0.05)
    assert reference_run.host_speed[-1] == pytest.approx(60 * KMH, rel=0.05)


def test_reference_shape(reference_run):
    """Host follows the set-speed ramp, then slows down behind the lead."""
    tr = reference_run
    peak = tr.t[np.argmax(tr.host_speed)]
    assert 45.0 <= peak <= 75.0
    assert tr.host_speed.max() == pytest.approx(120 * KMH, abs=0.5)
    assert check_headway(tr, P).passed
    assert np.all(tr.rel_dist > 0)


# -- config files ------------------------------------------------------------

def test_load_params_from_text():
    p = acc.load_params(text="# tuned\nheadway = 2.0\nk_v=0.5  # faster\n\n")
    assert p.headway == 2.0 and p.k_v == 0.5 and p.k_d == P.k_d


def test_load_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown key"):
        acc.load_params(text="speed_limit = 3")
    with pytest.raises(ValueError, match="line 1"):
        acc.load_scenario(text="just words")


def test_dump_round_trip(tmp_path):
    sc = Scenario(initial_gap=321.5, duration=30.0)
    path = tmp_path / "scenario.cfg"
    path.write_text(acc.dump_kv(sc))
    assert acc.load_scenario(path) == sc
    assert acc.load_params(text=acc.dump_kv(P)) == P
