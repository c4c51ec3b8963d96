import io
import json

import numpy as np
import pytest

from adsim.commander import (Commander, Decision, DecisionKind,
                             EngagementState, Mode, ValidityLimits)
from adsim.control import ActuationCommand
from adsim.geo import Pose2D, VehicleState


def state_with(age=0.0, stddev=0.05, now=10.0):
    return VehicleState(pose=Pose2D(0.0, 0.0), speed=5.0,
                        timestamp=now - age,
                        position_covariance=np.diag([stddev ** 2, stddev ** 2]))


def evaluate(commander, now=10.0, state=None, detection_age=0.1,
             trajectory_ok=True, command=None, lateral_deviation=0.1,
             off_route=False):
    if state is None:
        state = state_with(now=now)
    return commander.evaluate(now, state, detection_age, trajectory_ok,
                              command, lateral_deviation, off_route)


class TestValidityChecks:
    def test_all_healthy_passes(self):
        d = evaluate(Commander())
        assert d.kind is DecisionKind.PASS
        assert d.reasons == ()

    def test_stale_localization_disengages(self):
        d = evaluate(Commander(), state=state_with(age=0.5))
        assert d.kind is DecisionKind.DISENGAGE
        assert "stale localization" in d.reasons

    def test_state_age_near_bound_warns(self):
        c = Commander()
        d = evaluate(c, state=state_with(age=0.25))  # 83% of the 0.3 s bound
        assert d.kind is DecisionKind.WARN
        assert c.warn_count == 1

    def test_degraded_accuracy_disengages(self):
        d = evaluate(Commander(), state=state_with(stddev=0.31))
        assert d.kind is DecisionKind.DISENGAGE
        assert "accuracy" in d.reasons

    def test_missing_state_disengages(self):
        c = Commander()
        d = c.evaluate(10.0, None, 0.1, True, None, 0.0)
        assert d.kind is DecisionKind.DISENGAGE
        assert "no localization" in d.reasons

    def test_missing_trajectory_disengages(self):
        d = evaluate(Commander(), trajectory_ok=False)
        assert "no valid trajectory" in d.reasons

    def test_off_route_disengages(self):
        d = evaluate(Commander(), off_route=True)
        assert "off route" in d.reasons

    def test_lane_deviation_beyond_one_meter_disengages(self):
        d = evaluate(Commander(), lateral_deviation=1.2)
        assert "center lane deviation" in d.reasons

    def test_steering_rate_uses_command_timestamps(self):
        c = Commander()
        cmd0 = ActuationCommand(0.0, 0.0, timestamp=10.0)
        c.gate_command(cmd0, 0.02)  # primes the previous command
        # 0.02 rad in 0.02 s = 1.0 rad/s > 0.7 rad/s bound
        cmd1 = ActuationCommand(0.02, 0.0, timestamp=10.02)
        d = evaluate(c, now=10.02, command=cmd1)
        assert d.kind is DecisionKind.DISENGAGE
        assert "steering rate" in d.reasons

    def test_steering_rate_at_the_bound_passes(self):
        c = Commander()
        c.gate_command(ActuationCommand(0.0, 0.0, timestamp=10.0), 0.02)
        cmd1 = ActuationCommand(0.7 * 0.02, 0.0, timestamp=10.02)
        d = evaluate(c, now=10.02, command=cmd1, lateral_deviation=0.0)
        assert d.kind is not DecisionKind.DISENGAGE

    def test_multiple_reasons_accumulate(self):
        d = evaluate(Commander(), state=state_with(age=0.5, stddev=0.5),
                     trajectory_ok=False)
        assert set(d.reasons) >= {"stale localization", "accuracy",
                                  "no valid trajectory"}


class TestEngagement:
    def test_engage_requires_health_and_route(self):
        c = Commander()
        st = c.engage(1.0, Decision(DecisionKind.PASS), route_loaded=False)
        assert st.mode is Mode.MANUAL
        assert "no route loaded" in st.reason
        st = c.engage(1.0, Decision(DecisionKind.DISENGAGE, ("accuracy",)),
                      route_loaded=True)
        assert st.mode is Mode.MANUAL
        assert "accuracy" in st.reason
        st = c.engage(1.0, Decision(DecisionKind.PASS), route_loaded=True)
        assert st.mode is Mode.ENGAGED

    def test_disengage_to_fault_requires_release(self):
        c = Commander()
        c.engage(1.0, Decision(DecisionKind.PASS), True)
        st = c.disengage(2.0, "accuracy", fault=True)
        assert st.mode is Mode.FAULT
        assert c.release_fault(3.0).mode is Mode.MANUAL

    def test_operator_disengage_goes_to_manual(self):
        c = Commander()
        c.engage(1.0, Decision(DecisionKind.PASS), True)
        assert c.disengage(2.0, "operator").mode is Mode.MANUAL


class TestGating:
    def test_clamps_steering_and_counts_warning(self):
        c = Commander()
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        out = c.gate_command(ActuationCommand(0.9, 0.5, timestamp=0.02), 0.02)
        assert out.steering_angle == pytest.approx(0.55)
        assert c.warn_count == 1

    def test_rate_limits_between_consecutive_commands(self):
        c = Commander()
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        c.gate_command(ActuationCommand(0.0, 0.0, timestamp=0.0), 0.02)
        out = c.gate_command(ActuationCommand(0.5, 0.0, timestamp=0.02), 0.02)
        assert out.steering_angle == pytest.approx(0.7 * 0.02)

    def test_throttle_clamped_to_unit_range(self):
        c = Commander()
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        out = c.gate_command(ActuationCommand(0.0, 1.7, timestamp=0.0), 0.02)
        assert out.throttle == 1.0

    def test_single_coast_command_after_disengage(self):
        c = Commander()
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        c.gate_command(ActuationCommand(0.1, 0.4, timestamp=0.0), 0.02)
        c.disengage(0.02, "test", fault=True)
        coast = c.gate_command(ActuationCommand(0.3, 0.8, timestamp=0.02), 0.02)
        assert coast.throttle == 0.0
        assert coast.steering_angle == pytest.approx(0.1)  # holds last steering
        # the next tick falls through to manual passthrough
        nxt = c.gate_command(ActuationCommand(0.3, 0.8, timestamp=0.04), 0.02)
        assert nxt.throttle == c.manual_command.throttle

    def test_manual_mode_substitutes_operator_command(self):
        c = Commander()
        c.manual_command = ActuationCommand(0.05, 0.2)
        out = c.gate_command(ActuationCommand(0.4, 0.9, timestamp=0.0), 0.02)
        assert out.throttle == pytest.approx(0.2)
        assert out.steering_angle == pytest.approx(0.05)

    def test_steering_ratio_applied_at_output(self):
        c = Commander(steering_ratio=15.0)
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        out = c.gate_command(ActuationCommand(0.02, 0.0, timestamp=0.0), 0.02)
        assert out.steering_angle == pytest.approx(0.02 * 15.0)


class TestBlackbox:
    def test_one_record_per_engaged_tick(self):
        buf = io.StringIO()
        c = Commander(blackbox=buf)
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        dt = 0.02
        for i in range(500):  # 10 s at 50 Hz
            c.blackbox_record(i * dt, {"speed": 5.0})
        lines = buf.getvalue().splitlines()
        assert abs(len(lines) - 500) <= 1
        rec = json.loads(lines[0])
        assert rec["mode"] == "engaged"
        assert rec["speed"] == 5.0

    def test_manual_mode_writes_nothing(self):
        buf = io.StringIO()
        c = Commander(blackbox=buf)
        for i in range(100):
            c.blackbox_record(i * 0.02, {})
        assert buf.getvalue() == ""

    def test_final_record_carries_disengage_reason(self):
        buf = io.StringIO()
        c = Commander(blackbox=buf)
        c.engage(0.0, Decision(DecisionKind.PASS), True)
        c.blackbox_record(0.02, {})
        c.disengage(0.04, "accuracy", fault=True)
        c.blackbox_record(0.04, {}, force=True)
        records = [json.loads(l) for l in buf.getvalue().splitlines()]
        assert records[-1]["mode"] == "fault"
        assert records[-1]["reason"] == "accuracy"


class TestLimits:
    def test_defaults(self):
        lim = ValidityLimits()
        assert lim.max_state_age == 0.3
        assert lim.max_position_stddev == 0.30
        assert lim.max_off_route == 1.0
        assert lim.warn_fraction == 0.8

    def test_non_positive_bounds_rejected(self):
        with pytest.raises(ValueError):
            ValidityLimits(max_state_age=0.0)
