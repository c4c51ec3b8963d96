"""Lateral pure-pursuit and longitudinal PID control.

Steering: delta = arctan(2 L sin(alpha) / l_d) toward a target point placed
on the trajectory at an adaptive look-ahead distance
l_d = clamp(gamma * v * (1 - kappa), l_d_min, l_d_max), where kappa in [0,1]
is the trajectory curvature ahead normalized by a reference curvature.

Throttle: tau = Kp * a_ref + Ki * integral(v_err) + Kd * d(v_err)/dt,
rectangular integral with conditional anti-windup, backward-difference
derivative through a one-pole low-pass, output clamped to [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geo import Pose2D, VehicleState, normalize_heading
from .planner.mppi import Trajectory


@dataclass(frozen=True)
class ControlParams:
    wheelbase: float = 2.57
    gamma: float = 0.8            # look-ahead gain, s
    ld_min: float = 3.0
    ld_max: float = 25.0
    kappa_ref: float = 0.2        # 1/m, curvature normalization
    kp: float = 0.4
    ki: float = 0.08
    kd: float = 0.02
    derivative_tau: float = 0.5   # s, derivative low-pass
    integral_limit: float = 0.5   # m (integral of speed error)
    delta_max: float = 0.55
    steer_rate_max: float = 0.7   # rad/s
    slope_gain: float = 1.0       # optional gain-schedule hook, 1.0 = disabled

    def __post_init__(self):
        if self.wheelbase <= 0 or self.gamma <= 0 or self.ld_min <= 0:
            raise ValueError("wheelbase, gamma and ld_min must be > 0")
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be >= 0")


@dataclass(frozen=True)
class ActuationCommand:
    steering_angle: float   # rad, front wheels
    throttle: float         # [-1, 1], negative = braking
    timestamp: float = 0.0
    fault: bool = False


@dataclass
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    d_filtered: float = 0.0
    initialized: bool = False


def lookahead_distance(v: float, kappa: float, p: ControlParams) -> float:
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must be in [0, 1]")
    return float(np.clip(p.gamma * v * (1.0 - kappa), p.ld_min, p.ld_max))


def normalized_curvature(trajectory: Trajectory, from_s: float, p: ControlParams) -> float:
    """Max |curvature| within ld_max meters ahead, normalized to [0, 1]."""
    s = trajectory.arc_lengths()
    mask = (s >= from_s) & (s <= from_s + p.ld_max)
    if not mask.any():
        return 0.0
    peak = float(np.abs(trajectory.curvature[mask]).max())
    return min(peak / p.kappa_ref, 1.0)


def _project_on_trajectory(trajectory: Trajectory, pos: np.ndarray) -> float:
    pts = trajectory.positions()
    s = trajectory.arc_lengths()
    a, b = pts[:-1], pts[1:]
    ab = b - a
    ab_len2 = np.maximum((ab ** 2).sum(axis=1), 1e-12)
    t = np.clip(((pos - a) * ab).sum(axis=1) / ab_len2, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d2 = ((pos - proj) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    return float(s[i] + t[i] * math.sqrt(ab_len2[i]))


def _point_at(trajectory: Trajectory, s_target: float) -> np.ndarray:
    s = trajectory.arc_lengths()
    s_target = min(max(s_target, 0.0), float(s[-1]))
    x = np.interp(s_target, s, trajectory.x)
    y = np.interp(s_target, s, trajectory.y)
    return np.array([x, y])


def pure_pursuit_steering(state: VehicleState, trajectory: Trajectory,
                          p: ControlParams, lookahead: float | None = None
                          ) -> tuple[float, bool]:
    """Desired pre-rate-limit steering angle toward the look-ahead target.

    Returns (delta, fault). Fault is set (with zero steering) on an empty or
    degenerate trajectory.
    """
    if trajectory is None or len(trajectory) < 2:
        return 0.0, True
    pos = state.pose.position()
    s0 = _project_on_trajectory(trajectory, pos)
    if lookahead is None:
        kappa = normalized_curvature(trajectory, s0, p)
        lookahead = lookahead_distance(state.speed, kappa, p)
    target = _point_at(trajectory, s0 + lookahead)
    to_target = target - pos
    dist = float(np.linalg.norm(to_target))
    if dist < 1e-6:
        return 0.0, True
    alpha = normalize_heading(math.atan2(to_target[1], to_target[0]) - state.pose.heading)
    delta = math.atan(2.0 * p.wheelbase * math.sin(alpha) / lookahead)
    return float(np.clip(delta, -p.delta_max, p.delta_max)), False


def longitudinal_pid(v_ref: float, a_ref: float, v_meas: float, dt: float,
                     pid: PidState, p: ControlParams) -> tuple[float, PidState]:
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    err = v_ref - v_meas
    integral = pid.integral + err * dt
    integral = float(np.clip(integral, -p.integral_limit, p.integral_limit))
    if pid.initialized:
        d_raw = (err - pid.prev_error) / dt
        alpha = dt / (p.derivative_tau + dt)
        d_filtered = pid.d_filtered + alpha * (d_raw - pid.d_filtered)
    else:
        d_filtered = 0.0
    g = p.slope_gain
    tau = g * (p.kp * a_ref + p.ki * integral + p.kd * d_filtered)
    if tau > 1.0:
        tau = 1.0
        integral = pid.integral  # freeze on saturation
    elif tau < -1.0:
        tau = -1.0
        integral = pid.integral
    return tau, PidState(integral=integral, prev_error=err,
                         d_filtered=d_filtered, initialized=True)


class TrajectoryTracker:
    """Stateful controller: holds the rate limiter and PID state."""

    STANDSTILL_SPEED = 0.1
    STANDSTILL_BRAKE = -0.3

    def __init__(self, params: ControlParams | None = None):
        self.params = params if params is not None else ControlParams()
        self.pid = PidState()
        self._prev_delta = 0.0

    def reset(self) -> None:
        self.pid = PidState()
        self._prev_delta = 0.0

    def step(self, state: VehicleState, trajectory: Trajectory | None,
             dt: float) -> ActuationCommand:
        p = self.params
        if trajectory is None or len(trajectory) < 2:
            delta = self._rate_limit(0.0, dt)
            return ActuationCommand(steering_angle=delta, throttle=0.0,
                                    timestamp=state.timestamp, fault=True)
        delta_des, fault = pure_pursuit_steering(state, trajectory, p)
        delta = self._rate_limit(delta_des, dt)

        # speed/acceleration reference with a short preview to offset lag
        preview = min(0.2, float(trajectory.times[-1]))
        v_ref = float(np.interp(preview, trajectory.times, trajectory.speed))
        a_ref = float(np.interp(preview, trajectory.times, trajectory.acceleration))
        # Hold the brake only when the plan itself calls for a stop ahead;
        # otherwise a zero-speed start could latch into a standstill.
        near_mask = trajectory.times <= 1.5
        plans_stop = float(trajectory.speed[near_mask].max()) < 0.15
        if plans_stop and state.speed < 0.5:
            self.pid = PidState()
            tau = self.STANDSTILL_BRAKE
        else:
            tau, self.pid = longitudinal_pid(v_ref, a_ref, state.speed, dt, self.pid, p)
        return ActuationCommand(steering_angle=delta, throttle=tau,
                                timestamp=state.timestamp, fault=fault)

    def _rate_limit(self, delta: float, dt: float) -> float:
        p = self.params
        step = float(np.clip(delta - self._prev_delta,
                             -p.steer_rate_max * dt, p.steer_rate_max * dt))
        self._prev_delta = float(np.clip(self._prev_delta + step,
                                         -p.delta_max, p.delta_max))
        return self._prev_delta
