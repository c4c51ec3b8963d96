"""Sampling-based trajectory planner.

Thousands of noisy control sequences (longitudinal acceleration, steering
rate) are rolled out through a kinematic bicycle model, scored by a cost
function and merged with softmax weights on the control sequences; one
final rollout of the merged controls yields the output trajectory.

Hard speed constraints (posted limits, red-light stop lines, the
longitudinal safe-distance rule to a lead vehicle) are enforced twice: a
speed envelope built into the rollout dynamics caps every sample, and the
cost function penalizes any residual violation so the merged result stays
clear of the bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..geo import Pose2D, VehicleState, normalize_heading
from ..mapgraph import WaypointWindow
from ..vehicle import VehicleGeometry
from .collision import DetectedObject
from .lights import LightColor
from .rss import RssParams, rss_min_distance


@dataclass
class CostWeights:
    lateral_deviation: float = 1.0    # per m^2 per step
    speed_excess: float = 100.0       # per (m/s)^2 per step
    speed_tracking: float = 0.05      # per (m/s)^2 per step toward the envelope
    progress: float = 0.1             # reward per meter of arc progress
    collision: float = 1.0e6          # per colliding step
    rss_violation: float = 1.0e3      # per m^2 of violation per step
    control_effort: float = 0.01
    red_light_overrun: float = 1.0e6  # per overrunning step


@dataclass
class MppiConfig:
    sample_count: int = 2500
    horizon_steps: int = 50
    step_dt: float = 0.1
    noise_accel: float = 0.8          # std dev, m/s^2
    noise_steer_rate: float = 0.25    # std dev, rad/s
    temperature: float = 3.0
    weights: CostWeights = field(default_factory=CostWeights)
    half_lane_width: float = 1.75     # lead-vehicle selection corridor
    rss_plan_margin: float = 4.0      # extra meters kept beyond d_min in the plan
    comfort_brake: float = 1.5        # m/s^2, speed envelope build rate
    stop_offset: float = 0.25         # bumper setback from the stop line, m
    yellow_is_red_if_stoppable: bool = True
    unknown_decision_extra: float = 15.0  # m added to the stoppable distance
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be > 0")


@dataclass
class Trajectory:
    times: np.ndarray        # (N,), strictly increasing from 0
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    speed: np.ndarray
    acceleration: np.ndarray
    curvature: np.ndarray
    horizon: float
    emergency: bool = False

    def __len__(self) -> int:
        return len(self.times)

    def positions(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=-1)

    def arc_lengths(self) -> np.ndarray:
        d = np.hypot(np.diff(self.x), np.diff(self.y))
        return np.concatenate([[0.0], np.cumsum(d)])


class PlannerError(Exception):
    pass


def _rss_speed_cap(gap: np.ndarray, v_front: float, p: RssParams) -> np.ndarray:
    """Largest rear speed v with rss_min_distance(v, v_front) <= gap.

    Closed form from the quadratic in v; 0 when even a standstill violates.
    """
    a = 1.0 / (2.0 * p.beta_min)
    b = p.rho + p.rho * p.a_max / p.beta_min
    c = (
        p.d0
        + 0.5 * p.a_max * p.rho**2
        + (p.rho * p.a_max) ** 2 / (2.0 * p.beta_min)
        - v_front**2 / (2.0 * p.beta_max)
        - gap
    )
    disc = b * b - 4.0 * a * c
    root = (-b + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a)
    return np.where(disc > 0.0, np.maximum(root, 0.0), 0.0)


class MppiPlanner:
    def __init__(self, cfg: MppiConfig | None = None,
                 rss: RssParams | None = None,
                 geometry: VehicleGeometry | None = None):
        self.cfg = cfg if cfg is not None else MppiConfig()
        self.rss = rss if rss is not None else RssParams()
        self.geometry = geometry if geometry is not None else VehicleGeometry()
        self._rng = np.random.default_rng(self.cfg.seed)
        self._u_prev: np.ndarray | None = None

    # ---------------------------------------------------------------- helpers

    def _project_on_window(self, window: WaypointWindow, pts: np.ndarray):
        """(s, lateral) of points against the window polyline."""
        wp = window.positions
        a, b = wp[:-1], wp[1:]
        ab = b - a
        ab_len2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-12)
        out_s = np.empty(len(pts))
        out_lat = np.empty(len(pts))
        for k, p in enumerate(np.atleast_2d(pts)):
            t = np.clip(((p - a) * ab).sum(axis=1) / ab_len2, 0.0, 1.0)
            proj = a + t[:, None] * ab
            d2 = ((p - proj) ** 2).sum(axis=1)
            i = int(np.argmin(d2))
            seg_len = math.sqrt(ab_len2[i])
            out_s[k] = window.arc_lengths[i] + t[i] * seg_len
            d = ab[i] / seg_len
            rel = p - proj[i]
            out_lat[k] = d[0] * rel[1] - d[1] * rel[0]
        return out_s, out_lat

    def _stop_line(self, state: VehicleState, window: WaypointWindow,
                   light_state: dict[str, LightColor]) -> float | None:
        """Nearest stop-line arc distance demanding a stop, if any."""
        v = state.speed
        stoppable = v * v / (2.0 * self.cfg.comfort_brake)
        candidates = []
        for site, dist in window.lights:
            color = light_state.get(site.id, LightColor.UNKNOWN)
            if color is LightColor.RED:
                candidates.append(dist)
            elif color is LightColor.YELLOW and self.cfg.yellow_is_red_if_stoppable:
                if dist - self.geometry.front_edge_offset >= stoppable:
                    candidates.append(dist)
            elif color is LightColor.UNKNOWN:
                if dist <= stoppable + self.cfg.unknown_decision_extra:
                    candidates.append(dist)
        return min(candidates) if candidates else None

    def _speed_envelope(self, window: WaypointWindow,
                        stop_s: float | None) -> tuple[np.ndarray, np.ndarray]:
        """Backward-propagated speed envelope over the window arc."""
        s = window.arc_lengths
        env = np.array(window.speed_limits, dtype=float)
        if window.route_remaining <= s[-1] + 1e-6:
            env[-1] = 0.0  # route ends inside the window
        if stop_s is not None:
            target = stop_s - self.cfg.stop_offset - self.geometry.front_edge_offset
            dist = np.maximum(target - s, 0.0)
            v_stop = np.sqrt(2.0 * self.cfg.comfort_brake * dist)
            env = np.minimum(env, v_stop)
        for i in range(len(env) - 2, -1, -1):
            ds = s[i + 1] - s[i]
            env[i] = min(env[i], math.sqrt(env[i + 1] ** 2 + 2.0 * self.cfg.comfort_brake * ds))
        return s, env

    def _nominal_controls(self, state: VehicleState, window: WaypointWindow,
                          env_s: np.ndarray, env_v: np.ndarray, lead,
                          T: int, dt: float) -> np.ndarray:
        """Control sequence around which the noise is sampled.

        Longitudinal: full acceleration whenever below the speed envelope;
        the same caps used by the rollouts turn it into envelope tracking.
        Lateral: steering rates from a pursuit of a point ahead on the
        window centerline. The result is a feasible, progress-making,
        lane-keeping plan; sampling explores deviations from it (swerves,
        earlier braking) and the weighted merge keeps whatever scores
        better.
        """
        t_lead0, v_lead = (lead if lead is not None else (None, 0.0))
        L = self.geometry.wheelbase
        ws = window.arc_lengths
        wx = window.positions[:, 0]
        wy = window.positions[:, 1]
        x, y, psi = state.pose.x, state.pose.y, state.pose.heading
        v, delta, s = state.speed, state.steering_angle, 0.0
        s0, _ = self._project_on_window(window, np.array([[x, y]]))
        s_path = float(s0[0])
        out = np.empty((T, 2))
        for t in range(T):
            # steering: pursue the centerline point one look-ahead out
            ld = min(max(0.8 * v, 3.0), 25.0)
            tx = np.interp(s_path + ld, ws, wx)
            ty = np.interp(s_path + ld, ws, wy)
            alpha = normalize_heading(math.atan2(ty - y, tx - x) - psi)
            delta_des = math.atan(2.0 * L * math.sin(alpha) / ld)
            rate = float(np.clip((delta_des - delta) / dt,
                                 -self.geometry.steer_rate_max,
                                 self.geometry.steer_rate_max))
            out[t, 1] = rate
            delta = float(np.clip(delta + rate * dt,
                                  -self.geometry.delta_max, self.geometry.delta_max))
            # longitudinal: ride the envelope
            v_des = v + self.rss.a_max * dt
            s_pred = s + max(v_des, 0.0) * dt
            cap = float(np.interp(s_pred, env_s, env_v))
            if lead is not None:
                gap = (t_lead0 + v_lead * (t + 1) * dt
                       - (s_pred + self.geometry.front_edge_offset)
                       - self.cfg.rss_plan_margin)
                cap = min(cap, float(_rss_speed_cap(np.asarray(gap), v_lead, self.rss)))
            v_new = min(v_des, cap)
            v_new = max(v_new, v - self.rss.beta_max * dt)
            v_new = max(v_new, 0.0)
            out[t, 0] = (v_new - v) / dt
            v = v_new
            x += v * math.cos(psi) * dt
            y += v * math.sin(psi) * dt
            psi += v * math.tan(delta) / L * dt
            s += v * dt
            s_path += v * dt
        return out

    def _select_lead(self, window: WaypointWindow, objects: list[DetectedObject]):
        """Lead object on the route corridor: (s_rear_edge, speed along path)."""
        best = None
        for obj in objects:
            centers = obj.centers()
            s, lat = self._project_on_window(window, centers)
            in_lane = np.abs(lat) <= self.cfg.half_lane_width
            if not np.any(in_lane):
                continue
            s_rear = float((s - obj.radii())[in_lane].min())
            if s_rear <= self.geometry.front_edge_offset:
                continue
            if best is None or s_rear < best[0]:
                # speed component along the local path direction
                i = int(np.clip(np.searchsorted(window.arc_lengths, s.min()), 0,
                                len(window.headings) - 1))
                along = obj.speed * math.cos(obj.heading - window.headings[i])
                best = (s_rear, max(along, 0.0))
        return best

    # ------------------------------------------------------------------ plan

    def plan(self, state: VehicleState, window: WaypointWindow,
             objects: list[DetectedObject],
             light_state: dict[str, LightColor] | None = None,
             ) -> Trajectory:
        cfg = self.cfg
        if window is None or len(window.positions) < 2:
            raise PlannerError("empty waypoint window")
        light_state = light_state or {}

        stop_s = self._stop_line(state, window, light_state)
        emergency = False
        if stop_s is not None:
            dist = stop_s - self.geometry.front_edge_offset
            if dist > 0 and state.speed ** 2 / (2.0 * self.rss.beta_max) > dist:
                emergency = True
        env_s, env_v = self._speed_envelope(window, stop_s)
        lead = self._select_lead(window, objects)

        K, T, dt = cfg.sample_count, cfg.horizon_steps, cfg.step_dt
        u = self._nominal_controls(state, window, env_s, env_v, lead, T, dt)

        if emergency:
            u = np.zeros((T, 2))
            u[:, 0] = -self.rss.beta_max
            traj = self._rollout_single(state, u, env_s, env_v, lead)
            traj.emergency = True
            self._u_prev = u
            return traj

        eps = self._rng.standard_normal((K, T, 2))
        eps[:, :, 0] *= cfg.noise_accel
        eps[:, :, 1] *= cfg.noise_steer_rate
        v_ctrl = u[None, :, :] + eps
        v_ctrl[:, :, 0] = np.clip(v_ctrl[:, :, 0], -self.rss.beta_max, self.rss.a_max)
        v_ctrl[:, :, 1] = np.clip(v_ctrl[:, :, 1], -self.geometry.steer_rate_max,
                                  self.geometry.steer_rate_max)

        xs, ys, vs, ss, accs = self._rollout_batch(state, v_ctrl, env_s, env_v, lead)
        costs = self._cost(window, objects, lead, stop_s, xs, ys, vs, ss, accs,
                           v_ctrl, env_s, env_v)

        shifted = (costs - costs.min()) / cfg.temperature
        w = np.exp(-shifted)
        w /= w.sum()
        u_new = u + np.einsum("k,ktc->tc", w, eps)
        u_new[:, 0] = np.clip(u_new[:, 0], -self.rss.beta_max, self.rss.a_max)
        u_new[:, 1] = np.clip(u_new[:, 1], -self.geometry.steer_rate_max,
                              self.geometry.steer_rate_max)
        self._u_prev = u_new
        return self._rollout_single(state, u_new, env_s, env_v, lead)

    # -------------------------------------------------------------- rollouts

    def _rollout_batch(self, state: VehicleState, ctrl: np.ndarray,
                       env_s: np.ndarray, env_v: np.ndarray, lead):
        cfg = self.cfg
        K, T, _ = ctrl.shape
        dt = cfg.step_dt
        L = self.geometry.wheelbase
        x = np.full(K, state.pose.x)
        y = np.full(K, state.pose.y)
        psi = np.full(K, state.pose.heading)
        v = np.full(K, state.speed)
        delta = np.full(K, state.steering_angle)
        s = np.zeros(K)
        xs = np.empty((K, T)); ys = np.empty((K, T))
        vs = np.empty((K, T)); ss = np.empty((K, T)); accs = np.empty((K, T))
        t_lead0, v_lead = (lead if lead is not None else (None, 0.0))
        for t in range(T):
            a_cmd = ctrl[:, t, 0]
            delta = np.clip(delta + ctrl[:, t, 1] * dt,
                            -self.geometry.delta_max, self.geometry.delta_max)
            v_des = v + a_cmd * dt
            # speed envelope at the predicted arc position
            s_pred = s + np.maximum(v_des, 0.0) * dt
            cap = np.interp(s_pred, env_s, env_v)
            if lead is not None:
                gap = (t_lead0 + v_lead * (t + 1) * dt
                       - (s_pred + self.geometry.front_edge_offset)
                       - cfg.rss_plan_margin)
                cap = np.minimum(cap, _rss_speed_cap(gap, v_lead, self.rss))
            v_new = np.minimum(v_des, cap)
            v_new = np.maximum(v_new, v - self.rss.beta_max * dt)  # braking limit
            v_new = np.minimum(v_new, v + self.rss.a_max * dt)
            v_new = np.maximum(v_new, 0.0)
            a_eff = (v_new - v) / dt
            v = v_new
            x = x + v * np.cos(psi) * dt
            y = y + v * np.sin(psi) * dt
            psi = psi + v * np.tan(delta) / L * dt
            s = s + v * dt
            xs[:, t] = x; ys[:, t] = y; vs[:, t] = v; ss[:, t] = s; accs[:, t] = a_eff
        return xs, ys, vs, ss, accs

    def _rollout_single(self, state: VehicleState, u: np.ndarray,
                        env_s: np.ndarray, env_v: np.ndarray, lead) -> Trajectory:
        cfg = self.cfg
        T = u.shape[0]
        dt = cfg.step_dt
        L = self.geometry.wheelbase
        x, y = state.pose.x, state.pose.y
        psi, v = state.pose.heading, state.speed
        delta, s = state.steering_angle, 0.0
        t_lead0, v_lead = (lead if lead is not None else (None, 0.0))
        times = [0.0]
        X = [x]; Y = [y]; PSI = [psi]; V = [v]
        A = []; KAPPA = [math.tan(delta) / L]
        for t in range(T):
            delta = float(np.clip(delta + u[t, 1] * dt,
                                  -self.geometry.delta_max, self.geometry.delta_max))
            v_des = v + u[t, 0] * dt
            s_pred = s + max(v_des, 0.0) * dt
            cap = float(np.interp(s_pred, env_s, env_v))
            if lead is not None:
                gap = (t_lead0 + v_lead * (t + 1) * dt
                       - (s_pred + self.geometry.front_edge_offset)
                       - cfg.rss_plan_margin)
                cap = min(cap, float(_rss_speed_cap(np.asarray(gap), v_lead, self.rss)))
            v_new = min(v_des, cap)
            v_new = max(v_new, v - self.rss.beta_max * dt)
            v_new = min(v_new, v + self.rss.a_max * dt)
            v_new = max(v_new, 0.0)
            a_eff = (v_new - v) / dt
            v = v_new
            x += v * math.cos(psi) * dt
            y += v * math.sin(psi) * dt
            psi += v * math.tan(delta) / L * dt
            s += v * dt
            times.append((t + 1) * dt)
            X.append(x); Y.append(y); PSI.append(normalize_heading(psi)); V.append(v)
            A.append(a_eff); KAPPA.append(math.tan(delta) / L)
        A.append(A[-1] if A else 0.0)
        return Trajectory(
            times=np.array(times), x=np.array(X), y=np.array(Y),
            heading=np.array(PSI), speed=np.array(V),
            acceleration=np.array(A), curvature=np.array(KAPPA),
            horizon=T * dt,
        )

    # ------------------------------------------------------------------ cost

    def _cost(self, window: WaypointWindow, objects, lead, stop_s,
              xs, ys, vs, ss, accs, ctrl, env_s, env_v) -> np.ndarray:
        cfg = self.cfg
        w = cfg.weights
        K, T = xs.shape
        dt = cfg.step_dt
        costs = np.zeros(K)

        # lateral deviation from the window centerline, using each sample's
        # accumulated arc length as the matching abscissa (deviating samples
        # overrun slightly, a second-order error that is fine for a cost)
        s_ref = window.arc_lengths
        hd_ref = np.unwrap(window.headings)
        cx = np.interp(ss, s_ref, window.positions[:, 0])
        cy = np.interp(ss, s_ref, window.positions[:, 1])
        hd = np.interp(ss, s_ref, hd_ref)
        lat = np.cos(hd) * (ys - cy) - np.sin(hd) * (xs - cx)
        costs += w.lateral_deviation * (lat ** 2).sum(axis=1)

        # residual speed-limit excess (the rollout envelope keeps this ~0)
        lim = np.interp(ss, window.arc_lengths, window.speed_limits)
        costs += w.speed_excess * (np.maximum(vs - lim, 0.0) ** 2).sum(axis=1)

        # track the speed envelope (the fastest admissible profile)
        target = np.interp(ss, env_s, env_v)
        costs += w.speed_tracking * ((vs - target) ** 2).sum(axis=1)

        # progress reward
        costs -= w.progress * ss[:, -1]

        # collision with predicted object circles
        if objects:
            t_grid = (np.arange(T) + 1) * dt
            offs = np.array(self.geometry.circle_offsets)
            ego_r = self.geometry.circle_radius
            cos_p, sin_p = np.cos(hd), np.sin(hd)
            colliding = np.zeros((K, T), dtype=bool)
            for obj in objects:
                ovx = obj.speed * math.cos(obj.heading)
                ovy = obj.speed * math.sin(obj.heading)
                for circ in obj.circles:
                    ox = circ.x + ovx * t_grid
                    oy = circ.y + ovy * t_grid
                    r2 = (ego_r + circ.radius) ** 2
                    for off in offs:
                        dx = xs + off * cos_p - ox[None, :]
                        dy = ys + off * sin_p - oy[None, :]
                        colliding |= dx * dx + dy * dy < r2
            costs += w.collision * colliding.sum(axis=1)

        # safe-distance violation against the lead vehicle
        if lead is not None:
            s_lead0, v_lead = lead
            t_grid = (np.arange(T) + 1) * dt
            gap = s_lead0 + v_lead * t_grid[None, :] - (ss + self.geometry.front_edge_offset)
            d_min = rss_min_distance(vs, v_lead, self.rss)
            violation = np.maximum(d_min - gap, 0.0)
            costs += w.rss_violation * (violation ** 2).sum(axis=1)

        # red-light overrun
        if stop_s is not None:
            overrun = (ss + self.geometry.front_edge_offset) > (stop_s - cfg.stop_offset / 2)
            costs += w.red_light_overrun * overrun.sum(axis=1)

        costs += w.control_effort * (ctrl ** 2).sum(axis=(1, 2))
        return costs
