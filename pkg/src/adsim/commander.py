"""Safety gate between control and the plant.

Every control tick while engaged, the commander validates data freshness,
localization accuracy, route adherence and actuation limits. Hard-check
failures disengage within the same tick: output switches to manual
passthrough and a single zero-throttle coast command is emitted. A black
box appends one timestamped record per tick while engaged.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from .control import ActuationCommand
from .geo import VehicleState


class Mode(enum.Enum):
    MANUAL = "manual"
    ENGAGED = "engaged"
    FAULT = "fault"


class DecisionKind(enum.Enum):
    PASS = "pass"
    WARN = "warn"
    DISENGAGE = "disengage"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    reasons: tuple[str, ...] = ()


@dataclass(frozen=True)
class EngagementState:
    mode: Mode = Mode.MANUAL
    reason: str = "startup"
    timestamp: float = 0.0


@dataclass(frozen=True)
class ValidityLimits:
    max_state_age: float = 0.3        # s
    max_detection_age: float = 0.5    # s
    max_position_stddev: float = 0.30  # m, degraded-accuracy bound
    max_off_route: float = 1.0        # m
    max_steering: float = 0.55        # rad
    max_steering_rate: float = 0.7    # rad/s
    warn_fraction: float = 0.8

    def __post_init__(self):
        for name in ("max_state_age", "max_detection_age", "max_position_stddev",
                     "max_off_route", "max_steering", "max_steering_rate"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


class Commander:
    def __init__(self, limits: ValidityLimits | None = None,
                 steering_ratio: float = 1.0,
                 blackbox: IO[str] | None = None):
        self.limits = limits if limits is not None else ValidityLimits()
        self.steering_ratio = steering_ratio
        self.engagement = EngagementState()
        self.warn_count = 0
        self._blackbox = blackbox
        self._prev_cmd: ActuationCommand | None = None
        self._coast_pending = False
        self.manual_command = ActuationCommand(0.0, 0.0)

    # ----------------------------------------------------------- evaluation

    def evaluate(self, now: float, state: VehicleState | None,
                 detection_age: float | None,
                 trajectory_ok: bool,
                 command: ActuationCommand | None,
                 lateral_deviation: float | None,
                 off_route: bool = False) -> Decision:
        lim = self.limits
        hard: list[str] = []
        warn: list[str] = []

        def check(value, bound, label):
            if value > bound:
                hard.append(label)
            elif value > lim.warn_fraction * bound:
                warn.append(label)

        if state is None:
            hard.append("no localization")
        else:
            check(now - state.timestamp, lim.max_state_age, "stale localization")
            check(state.position_stddev(), lim.max_position_stddev, "accuracy")
        if detection_age is not None:
            check(detection_age, lim.max_detection_age, "stale detections")
        if not trajectory_ok:
            hard.append("no valid trajectory")
        if off_route:
            hard.append("off route")
        elif lateral_deviation is not None:
            check(abs(lateral_deviation), lim.max_off_route, "center lane deviation")
        if command is not None:
            check(abs(command.steering_angle), lim.max_steering, "steering angle")
            if self._prev_cmd is not None:
                dt = command.timestamp - self._prev_cmd.timestamp
                if dt > 0:
                    rate = abs(command.steering_angle - self._prev_cmd.steering_angle) / dt
                    check(rate, lim.max_steering_rate * 1.001, "steering rate")
        if hard:
            return Decision(DecisionKind.DISENGAGE, tuple(hard))
        if warn:
            self.warn_count += len(warn)
            return Decision(DecisionKind.WARN, tuple(warn))
        return Decision(DecisionKind.PASS)

    # ----------------------------------------------------------- engagement

    def engage(self, now: float, decision: Decision, route_loaded: bool) -> EngagementState:
        if self.engagement.mode is Mode.ENGAGED:
            return self.engagement
        reasons = list(decision.reasons) if decision.kind is DecisionKind.DISENGAGE else []
        if not route_loaded:
            reasons.append("no route loaded")
        if reasons:
            self.engagement = replace(self.engagement,
                                      reason="refused: " + ", ".join(reasons))
            return self.engagement
        self.engagement = EngagementState(Mode.ENGAGED, "operator engage", now)
        return self.engagement

    def disengage(self, now: float, reason: str, fault: bool = False) -> EngagementState:
        if self.engagement.mode is Mode.ENGAGED:
            mode = Mode.FAULT if fault else Mode.MANUAL
            self.engagement = EngagementState(mode, reason, now)
            self._coast_pending = True
        return self.engagement

    def release_fault(self, now: float) -> EngagementState:
        if self.engagement.mode is Mode.FAULT:
            self.engagement = EngagementState(Mode.MANUAL, "fault acknowledged", now)
        return self.engagement

    # ------------------------------------------------------------- gating

    def gate_command(self, cmd: ActuationCommand, dt: float) -> ActuationCommand:
        """Clamp, rate-limit and (in manual) substitute operator input."""
        lim = self.limits
        if self.engagement.mode is not Mode.ENGAGED:
            if self._coast_pending:
                self._coast_pending = False
                coast = ActuationCommand(
                    steering_angle=self._prev_cmd.steering_angle if self._prev_cmd else 0.0,
                    throttle=0.0, timestamp=cmd.timestamp)
                self._prev_cmd = coast
                return self._finalize(coast)
            manual = replace(self.manual_command, timestamp=cmd.timestamp)
            cmd = manual
        delta = float(np.clip(cmd.steering_angle, -lim.max_steering, lim.max_steering))
        if abs(cmd.steering_angle) > lim.max_steering:
            self.warn_count += 1
        if self._prev_cmd is not None and dt > 0:
            max_step = lim.max_steering_rate * dt
            delta = float(np.clip(delta, self._prev_cmd.steering_angle - max_step,
                                  self._prev_cmd.steering_angle + max_step))
        out = ActuationCommand(steering_angle=delta,
                               throttle=float(np.clip(cmd.throttle, -1.0, 1.0)),
                               timestamp=cmd.timestamp)
        self._prev_cmd = out
        return self._finalize(out)

    def _finalize(self, cmd: ActuationCommand) -> ActuationCommand:
        # steering-ratio conversion is the plant boundary; the simulated
        # plant takes front-wheel angles, so the default ratio is 1.0
        if self.steering_ratio == 1.0:
            return cmd
        return replace(cmd, steering_angle=cmd.steering_angle * self.steering_ratio)

    # ------------------------------------------------------------ blackbox

    def blackbox_record(self, now: float, snapshot: dict, force: bool = False) -> None:
        """Append one record per tick while engaged or faulted.

        ``force`` writes the final record on the disengagement tick so the
        transition reason lands in the log.
        """
        if self._blackbox is None:
            return
        if self.engagement.mode is Mode.MANUAL and not force:
            return
        record = {"t": round(now, 6), "mode": self.engagement.mode.value,
                  "reason": self.engagement.reason}
        record.update(snapshot)
        self._blackbox.write(json.dumps(record) + "\n")
