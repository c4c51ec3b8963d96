"""Deterministic virtual test ground.

Ego vehicle: kinematic bicycle model (rear axle, no slip angle) with
first-order throttle and steering lags, integrated with RK4. Object agents
cover static obstacles, constant-speed lane followers, scripted speed
profiles and traffic-light phase controllers. "Perception" returns ground
truth within a configurable sensor range, with optional Gaussian position
noise and light misclassification, all driven by a single seeded RNG.

Plant parameters are generic placeholders, not measurements of a specific
vehicle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .control import ActuationCommand
from .geo import Pose2D, VehicleState, normalize_heading
from .mapgraph import LaneGraph, Route, RoutePath, shortest_route
from .planner.collision import Circle, DetectedObject
from .planner.lights import LightColor, TrafficLightObservation
from .vehicle import VehicleGeometry


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class PlantParams:
    wheelbase: float = 2.57
    steer_tau: float = 0.3       # s, steering first-order lag
    accel_tau: float = 0.2       # s, accel first-order lag
    accel_max: float = 2.5       # m/s^2 at throttle +1
    brake_max: float = 9.0       # m/s^2 at throttle -1
    steer_rate_max: float = 0.7  # rad/s at the front wheels
    delta_max: float = 0.55


@dataclass
class BicycleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    steering: float = 0.0        # actual front-wheel angle
    accel: float = 0.0           # actual longitudinal acceleration

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.speed,
                         self.steering, self.accel])


def _derivative(s: np.ndarray, delta_cmd: float, a_target: float,
                p: PlantParams) -> np.ndarray:
    x, y, psi, v, delta, acc = s
    d_delta = np.clip((delta_cmd - delta) / p.steer_tau,
                      -p.steer_rate_max, p.steer_rate_max)
    d_acc = (a_target - acc) / p.accel_tau
    return np.array([
        v * math.cos(psi),
        v * math.sin(psi),
        v * math.tan(delta) / p.wheelbase,
        acc,
        d_delta,
        d_acc,
    ])


def step_bicycle(state: BicycleState, cmd: ActuationCommand, dt: float,
                 p: PlantParams = PlantParams()) -> BicycleState:
    """One RK4 step of the lagged kinematic bicycle. dt must be in (0, 0.1]."""
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must be in (0, 0.1]")
    tau = float(np.clip(cmd.throttle, -1.0, 1.0))
    a_target = tau * p.accel_max if tau >= 0.0 else tau * p.brake_max
    delta_cmd = float(np.clip(cmd.steering_angle, -p.delta_max, p.delta_max))
    s = state.as_array()
    k1 = _derivative(s, delta_cmd, a_target, p)
    k2 = _derivative(s + 0.5 * dt * k1, delta_cmd, a_target, p)
    k3 = _derivative(s + 0.5 * dt * k2, delta_cmd, a_target, p)
    k4 = _derivative(s + dt * k3, delta_cmd, a_target, p)
    s = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    x, y, psi, v, delta, acc = s
    if v < 0.0:
        v, acc = 0.0, max(acc, 0.0) if a_target >= 0.0 else 0.0
    return BicycleState(x=float(x), y=float(y), heading=normalize_heading(float(psi)),
                        speed=float(v), steering=float(delta), accel=float(acc))


# ----------------------------------------------------------------- agents

@dataclass
class AgentScript:
    agent_id: str
    behavior: str                 # static | lane_follower | scripted_speed | traffic_light
    params: dict = field(default_factory=dict)
    activate_time: float = 0.0
    activate_ego_distance: float | None = None


class _Agent:
    def __init__(self, script: AgentScript):
        self.script = script
        self.active = False

    def maybe_activate(self, t: float, ego_xy: np.ndarray) -> None:
        if self.active:
            return
        if t + 1e-12 < self.script.activate_time:
            return
        lim = self.script.activate_ego_distance
        if lim is not None and self._distance_to(ego_xy) > lim:
            return
        self.active = True

    def _distance_to(self, ego_xy: np.ndarray) -> float:
        return 0.0

    def step(self, dt: float) -> None:
        pass

    def detected_object(self) -> DetectedObject | None:
        return None


class StaticObstacleAgent(_Agent):
    def __init__(self, script: AgentScript, graph: LaneGraph):
        super().__init__(script)
        p = script.params
        if "position" in p:
            x, y = p["position"]
            heading = float(p.get("heading", 0.0))
        else:
            path = _agent_path(graph, p, require=("segment",))
            s = float(p.get("offset", 0.0))
            lateral = float(p.get("lateral", 0.0))
            base = path.point_at(s)
            h = path.heading_at(s)
            # positive lateral is left of travel
            x = base[0] - lateral * math.sin(h)
            y = base[1] + lateral * math.cos(h)
            heading = h
        radius = float(p.get("radius", 1.0))
        self._obj = DetectedObject(
            id=script.agent_id,
            circles=[Circle(x, y, radius)],
            speed=0.0,
            heading=heading,
        )

    def _distance_to(self, ego_xy: np.ndarray) -> float:
        c = self._obj.circles[0]
        return float(math.hypot(c.x - ego_xy[0], c.y - ego_xy[1]))

    def detected_object(self) -> DetectedObject | None:
        return self._obj if self.active else None


class LaneFollowerAgent(_Agent):
    """Follows a lane route at constant (or scripted) speed."""

    def __init__(self, script: AgentScript, graph: LaneGraph):
        super().__init__(script)
        p = script.params
        self.path = _agent_path(graph, p, require=("start_segment",))
        self.s = float(p.get("start_offset", 0.0))
        self.speed = float(p.get("speed", 0.0))
        self.profile = p.get("speed_profile")  # [[t, v], ...] piecewise linear
        if self.profile is not None:
            times = [float(pt[0]) for pt in self.profile]
            if any(b < a for a, b in zip(times, times[1:])):
                raise ScenarioError(
                    f"agent {script.agent_id!r}: speed_profile times must be non-decreasing")
        self.loop = bool(p.get("loop", False))
        self.length = float(p.get("length", 4.2))
        self.radius = float(p.get("radius", 1.0))
        self.t = 0.0

    def current_speed(self) -> float:
        if self.profile is None:
            return self.speed
        times = np.array([pt[0] for pt in self.profile], dtype=float)
        vals = np.array([pt[1] for pt in self.profile], dtype=float)
        return float(np.interp(self.t, times, vals))

    def step(self, dt: float) -> None:
        self.t += dt
        if not self.active:
            return
        self.s += self.current_speed() * dt
        if self.loop:
            self.s %= self.path.length
        else:
            self.s = min(self.s, self.path.length)

    def detected_object(self) -> DetectedObject | None:
        if not self.active:
            return None
        h = self.path.heading_at(self.s)
        circles = []
        for off in (0.0, self.length - 2.0 * self.radius):
            base = self.path.point_at(min(self.s + off, self.path.length))
            circles.append(Circle(float(base[0]), float(base[1]), self.radius))
        return DetectedObject(id=self.script.agent_id, circles=circles,
                              speed=self.current_speed(), heading=h)

    def _distance_to(self, ego_xy: np.ndarray) -> float:
        base = self.path.point_at(self.s)
        return float(np.linalg.norm(base - ego_xy))


class TrafficLightAgent(_Agent):
    """Drives one light site through a cyclic [color, duration] schedule."""

    def __init__(self, script: AgentScript, graph: LaneGraph):
        super().__init__(script)
        p = script.params
        self.site_id = str(p.get("site", ""))
        if self.site_id not in graph.lights:
            raise ScenarioError(f"agent {script.agent_id!r}: unknown light site {self.site_id!r}")
        schedule = p.get("schedule")
        if not schedule:
            raise ScenarioError(f"agent {script.agent_id!r}: schedule required")
        self.phases = [(LightColor(str(c)), float(d)) for c, d in schedule]
        if any(d < 0 for _, d in self.phases):
            raise ScenarioError(f"agent {script.agent_id!r}: negative phase duration")
        self.cycle = sum(d for _, d in self.phases)
        self.phase_offset = float(p.get("phase_offset", 0.0))
        self.t = 0.0
        self.active = True

    def step(self, dt: float) -> None:
        self.t += dt

    def color_at(self, t: float) -> LightColor:
        if self.cycle <= 0.0:
            return self.phases[0][0]
        u = (t + self.phase_offset) % self.cycle
        for color, dur in self.phases:
            if u < dur:
                return color
            u -= dur
        return self.phases[-1][0]


def _agent_path(graph: LaneGraph, params: dict, require=()) -> RoutePath:
    for key in require:
        if key not in params and "segments" not in params:
            raise ScenarioError(f"agent params missing {key!r}")
    if "segments" in params:
        ids = [str(s) for s in params["segments"]]
        total = sum(graph.segments[i].length for i in ids)
        route = Route(segment_ids=ids, total_length=total)
    else:
        start = str(params.get("start_segment", params.get("segment")))
        goal = str(params.get("goal_segment", start))
        route = shortest_route(graph, start, goal)
        if route is None:
            raise ScenarioError(f"no route from {start!r} to {goal!r} for agent")
    return RoutePath(graph, route)


# ------------------------------------------------------------------ world

@dataclass(frozen=True)
class SensorParams:
    object_range: float = 70.0
    light_range: float = 70.0
    position_noise: float = 0.0           # std dev, m, on object circle centers
    light_misclassification: float = 0.0  # per-observation probability


class World:
    """Single-driver simulation: ego plant, agents, sensors, fault hooks."""

    def __init__(self, graph: LaneGraph, ego_path: RoutePath,
                 ego_start: BicycleState, agents: list[_Agent],
                 plant: PlantParams = PlantParams(),
                 sensors: SensorParams = SensorParams(),
                 geometry: VehicleGeometry = VehicleGeometry(),
                 seed: int = 0):
        self.graph = graph
        self.ego_path = ego_path
        self.ego = ego_start
        self.agents = agents
        self.plant = plant
        self.sensors = sensors
        self.geometry = geometry
        self.time = 0.0
        self.rng = np.random.default_rng(seed)
        self.nominal_stddev = 0.05
        # fault-injection hooks
        self.localization_frozen = False
        self.covariance_override: float | None = None
        self._frozen_state: VehicleState | None = None

    def step(self, dt: float, command: ActuationCommand) -> None:
        self.ego = step_bicycle(self.ego, command, dt, self.plant)
        ego_xy = np.array([self.ego.x, self.ego.y])
        for agent in self.agents:
            agent.maybe_activate(self.time, ego_xy)
            agent.step(dt)
        self.time += dt

    def teleport_ego(self, x: float, y: float) -> None:
        self.ego.x, self.ego.y = x, y

    # ---------------------------------------------------------- observation

    def vehicle_state(self) -> VehicleState:
        if self.localization_frozen and self._frozen_state is not None:
            return self._frozen_state
        std = self.covariance_override if self.covariance_override is not None \
            else self.nominal_stddev
        state = VehicleState(
            pose=Pose2D(self.ego.x, self.ego.y, self.ego.heading),
            speed=self.ego.speed,
            acceleration=self.ego.accel,
            steering_angle=self.ego.steering,
            timestamp=self.time,
            position_covariance=np.diag([std * std, std * std]),
        )
        if self.localization_frozen:
            self._frozen_state = state
        return state

    def detections(self) -> list[DetectedObject]:
        ego_xy = np.array([self.ego.x, self.ego.y])
        out = []
        for agent in self.agents:
            obj = agent.detected_object()
            if obj is None:
                continue
            dists = np.linalg.norm(obj.centers() - ego_xy, axis=1)
            if dists.min() > self.sensors.object_range:
                continue
            if self.sensors.position_noise > 0.0:
                noisy = []
                for c in obj.circles:
                    dx, dy = self.rng.normal(0.0, self.sensors.position_noise, 2)
                    noisy.append(Circle(c.x + dx, c.y + dy, c.radius))
                obj = DetectedObject(id=obj.id, circles=noisy,
                                     speed=obj.speed, heading=obj.heading)
            out.append(obj)
        return out

    def light_observations(self) -> list[TrafficLightObservation]:
        ego_xy = np.array([self.ego.x, self.ego.y])
        controllers = {a.site_id: a for a in self.agents
                       if isinstance(a, TrafficLightAgent)}
        out = []
        for site in self.graph.lights.values():
            pos = site.approximate_light_position
            if math.hypot(pos.x - ego_xy[0], pos.y - ego_xy[1]) > self.sensors.light_range:
                continue
            ctrl = controllers.get(site.id)
            color = ctrl.color_at(self.time) if ctrl is not None else LightColor.GREEN
            if (self.sensors.light_misclassification > 0.0
                    and self.rng.random() < self.sensors.light_misclassification):
                others = [c for c in (LightColor.RED, LightColor.YELLOW, LightColor.GREEN)
                          if c is not color]
                color = others[int(self.rng.integers(len(others)))]
            out.append(TrafficLightObservation(site_id=site.id, color=color,
                                               confidence=1.0, timestamp=self.time))
        return out

    def ego_clearance(self) -> float:
        from .planner.collision import collision_clearance
        circles = self.geometry.circles_at(self.ego.x, self.ego.y, self.ego.heading)
        objects = [a.detected_object() for a in self.agents]
        objects = [o for o in objects if o is not None]
        if not objects:
            return float("inf")
        return collision_clearance(circles, objects)


# --------------------------------------------------------------- scenario

@dataclass
class ScenarioSpec:
    name: str
    map_path: str
    ego_start_segment: str
    ego_goal_segment: str
    ego_start_offset: float = 0.0
    agents: list[AgentScript] = field(default_factory=list)
    overrides: dict = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    duration: float = 60.0
    seed: int = 0

    @classmethod
    def from_yaml(cls, text: str, name: str = "scenario") -> "ScenarioSpec":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"invalid scenario document: {exc}") from exc
        if not isinstance(doc, dict):
            raise ScenarioError("scenario document must be a mapping")
        problems = []
        for key in ("map", "ego"):
            if key not in doc:
                problems.append(f"missing field {key!r}")
        ego = doc.get("ego") or {}
        for key in ("start_segment", "goal_segment"):
            if key not in ego:
                problems.append(f"missing field ego.{key!r}")
        if problems:
            raise ScenarioError("; ".join(problems))
        agents = []
        for i, a in enumerate(doc.get("agents", []) or []):
            if "id" not in a or "behavior" not in a:
                raise ScenarioError(f"agent #{i}: 'id' and 'behavior' are required")
            behavior = str(a["behavior"])
            if behavior not in ("static", "lane_follower", "scripted_speed", "traffic_light"):
                raise ScenarioError(f"agent {a['id']!r}: unknown behavior {behavior!r}")
            params = {k: v for k, v in a.items()
                      if k not in ("id", "behavior", "activate_time", "activate_ego_distance")}
            agents.append(AgentScript(
                agent_id=str(a["id"]), behavior=behavior, params=params,
                activate_time=float(a.get("activate_time", 0.0)),
                activate_ego_distance=a.get("activate_ego_distance"),
            ))
        return cls(
            name=str(doc.get("name", name)),
            map_path=str(doc["map"]),
            ego_start_segment=str(ego["start_segment"]),
            ego_goal_segment=str(ego["goal_segment"]),
            ego_start_offset=float(ego.get("start_offset", 0.0)),
            agents=agents,
            overrides=doc.get("overrides", {}) or {},
            events=doc.get("events", []) or [],
            duration=float(doc.get("duration", 60.0)),
            seed=int(doc.get("seed", 0)),
        )


def build_agents(spec: ScenarioSpec, graph: LaneGraph) -> list[_Agent]:
    out: list[_Agent] = []
    for script in spec.agents:
        if script.behavior == "static":
            out.append(StaticObstacleAgent(script, graph))
        elif script.behavior in ("lane_follower", "scripted_speed"):
            out.append(LaneFollowerAgent(script, graph))
        elif script.behavior == "traffic_light":
            out.append(TrafficLightAgent(script, graph))
        else:  # pragma: no cover - validated at parse time
            raise ScenarioError(f"unknown behavior {script.behavior!r}")
    return out
