"""Scenario runner: wires map, planner, control, commander, sim world and
telemetry onto the component bus and drives the fixed-step loop.

The world advances at 10 ms steps from a simulated clock; localization and
perception tick at 20 Hz, the planner at 10 Hz, control and the commander
at 50 Hz. Operator commands arriving over telemetry are applied at tick
boundaries only.
"""

from __future__ import annotations

import dataclasses
import math
import time as _time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..commander import Commander, DecisionKind, Mode, ValidityLimits
from ..control import ActuationCommand, ControlParams, TrajectoryTracker
from ..geo import Pose2D
from ..mapgraph import (LaneGraph, OffRouteError, RoutePath, locate_on_route,
                        parse_vector_map, shortest_route, waypoint_window)
from ..planner import (LightColor, MppiConfig, MppiPlanner, RssParams,
                       TrafficLightFilter)
from ..planner.mppi import CostWeights, PlannerError
from ..runtime import ComponentDescriptor, SimClock, Stack
from ..simworld import (BicycleState, PlantParams, ScenarioError, ScenarioSpec,
                        SensorParams, TrafficLightAgent, World, AgentScript,
                        build_agents)
from ..vehicle import VehicleGeometry
from .metrics import RunMetrics
from .telemetry import TelemetryServer

WORLD_DT = 0.01
LOCALIZATION_PERIOD = 0.05
PERCEPTION_PERIOD = 0.05
PLANNER_PERIOD = 0.1
CONTROL_PERIOD = 0.02
TELEMETRY_PERIOD = 0.05
DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def resolve_data_path(name: str, kind: str, base: Path | None = None) -> Path:
    candidates = [Path(name)]
    if base is not None:
        candidates.append(base / name)
    candidates.append(DATA_DIR / kind / name)
    suffix = ".geojson" if kind == "maps" else ".yaml"
    candidates.append(DATA_DIR / kind / (name + suffix))
    for c in candidates:
        if c.is_file():
            return c
    raise ScenarioError(f"cannot resolve {kind[:-1]} {name!r}")


def _apply_overrides(obj, overrides: dict | None):
    if not overrides:
        return obj
    valid = {f.name for f in dataclasses.fields(obj)}
    unknown = set(overrides) - valid
    if unknown:
        raise ScenarioError(f"unknown override fields for "
                            f"{type(obj).__name__}: {sorted(unknown)}")
    return replace(obj, **overrides)


@dataclass
class SessionResult:
    metrics: RunMetrics
    aggregates: dict
    collisions: int
    interventions: int
    completed: bool

    @property
    def exit_code(self) -> int:
        bad = (self.collisions > 0 or self.interventions > 0
               or self.aggregates.get("rss_violations", 0) > 0)
        return 1 if bad else 0


class Session:
    def __init__(self, spec: ScenarioSpec, map_text: str | None = None,
                 telemetry_port: int | None = None, realtime: bool = False,
                 blackbox_path: str | None = None, auto_engage: bool = True,
                 scenario_dir: Path | None = None):
        self.spec = spec
        self.realtime = realtime
        if map_text is None:
            map_path = resolve_data_path(spec.map_path, "maps", scenario_dir)
            map_text = map_path.read_text()
        self.graph: LaneGraph = parse_vector_map(map_text)
        route = shortest_route(self.graph, spec.ego_start_segment, spec.ego_goal_segment)
        if route is None:
            raise ScenarioError(
                f"no route from {spec.ego_start_segment!r} to "
                f"{spec.ego_goal_segment!r}: goal unreachable")
        self.path = RoutePath(self.graph, route)

        ov = spec.overrides or {}
        self.geometry = _apply_overrides(VehicleGeometry(), ov.get("geometry"))
        self.rss = _apply_overrides(RssParams(), ov.get("rss"))
        mppi_ov = dict(ov.get("mppi") or {})
        weights = _apply_overrides(CostWeights(), mppi_ov.pop("weights", None))
        mppi_ov.setdefault("seed", spec.seed)
        cfg = _apply_overrides(MppiConfig(weights=weights), mppi_ov)
        self.control_params = _apply_overrides(
            ControlParams(wheelbase=self.geometry.wheelbase), ov.get("control"))
        self.plant = _apply_overrides(
            PlantParams(wheelbase=self.geometry.wheelbase), ov.get("plant"))
        self.sensors = _apply_overrides(SensorParams(), ov.get("sensors"))
        self.limits = _apply_overrides(ValidityLimits(), ov.get("limits"))
        session_ov = ov.get("session") or {}
        self.horizon = float(session_ov.get("horizon", 80.0))
        self.capture_radius = float(session_ov.get("capture_radius", 5.0))

        start = self.path.point_at(spec.ego_start_offset)
        heading = self.path.heading_at(spec.ego_start_offset)
        ego = BicycleState(x=float(start[0]), y=float(start[1]), heading=heading)
        agents = build_agents(spec, self.graph)
        self.world = World(self.graph, self.path, ego, agents,
                           plant=self.plant, sensors=self.sensors,
                           geometry=self.geometry, seed=spec.seed)

        self.planner = MppiPlanner(cfg, self.rss, self.geometry)
        self.tracker = TrajectoryTracker(self.control_params)
        self.light_filter = TrafficLightFilter(list(self.graph.lights.keys()))
        self._blackbox_file = open(blackbox_path, "w") if blackbox_path else None
        self.commander = Commander(self.limits, blackbox=self._blackbox_file)
        self.auto_engage = auto_engage
        self._operator_blocked = False

        self.metrics = RunMetrics()
        self.collisions = 0
        self.interventions = 0
        self.telemetry = TelemetryServer(telemetry_port) if telemetry_port is not None else None

        # latest-value caches updated by bus callbacks
        self.last_state = None
        self.last_state_time = -math.inf
        self.last_detections = []
        self.last_detection_time = -math.inf
        self.last_observations = []
        self.last_trajectory = None
        self.last_trajectory_time = -math.inf
        self.last_command = ActuationCommand(0.0, 0.0)
        self.plant_command = ActuationCommand(0.0, 0.0)
        self._off_route = False
        self._stop_gap = math.inf
        self._agg_cache = None

        self._build_stack()

    # ------------------------------------------------------------ components

    def _build_stack(self) -> None:
        self.clock = SimClock()
        self.stack = Stack(self.clock)
        reg = self.stack.register_component

        self._h_loc = reg(ComponentDescriptor("localization", period=LOCALIZATION_PERIOD),
                          periodic=self._tick_localization)
        self._h_per = reg(ComponentDescriptor("perception", period=PERCEPTION_PERIOD),
                          periodic=self._tick_perception)
        self._h_pln = reg(
            ComponentDescriptor("planner", period=PLANNER_PERIOD,
                                parameters={"samples": self.planner.cfg.sample_count}),
            subscriptions={
                "vehicle_state": self._on_state,
                "detections": self._on_detections,
                "light_observations": self._on_lights,
            },
            periodic=self._tick_planner)
        self._h_ctl = reg(ComponentDescriptor("control", period=CONTROL_PERIOD),
                          subscriptions={"trajectory": self._on_trajectory},
                          periodic=self._tick_control)
        self._h_cmd = reg(ComponentDescriptor("commander", period=CONTROL_PERIOD),
                          subscriptions={"actuation": self._on_actuation},
                          periodic=self._tick_commander)

    def _on_state(self, msg):
        self.last_state = msg.payload
        self.last_state_time = msg.timestamp

    def _on_detections(self, msg):
        self.last_detections = msg.payload
        self.last_detection_time = msg.timestamp

    def _on_lights(self, msg):
        self.last_observations = msg.payload

    def _on_trajectory(self, msg):
        self.last_trajectory = msg.payload
        self.last_trajectory_time = msg.timestamp

    def _on_actuation(self, msg):
        self.last_command = msg.payload

    def _tick_localization(self, now: float) -> None:
        self._h_loc.publish("vehicle_state", self.world.vehicle_state())

    def _tick_perception(self, now: float) -> None:
        self._h_per.publish("detections", self.world.detections())
        self._h_per.publish("light_observations", self.world.light_observations())

    def _tick_planner(self, now: float) -> None:
        for obs in self.last_observations:
            self.light_filter.update(obs)
        self.last_observations = []
        state = self.last_state
        if state is None:
            return
        snapshot = self.light_filter.snapshot(now)
        self._note_light_detections(state, snapshot)
        try:
            window = waypoint_window(self.path, state.pose, self.horizon,
                                     capture_radius=self.capture_radius)
            self._off_route = False
        except OffRouteError:
            self._off_route = True
            self.last_trajectory = None
            return
        try:
            traj = self.planner.plan(state, window, self.last_detections, snapshot)
        except PlannerError:
            self.last_trajectory = None
            return
        self._h_pln.publish("trajectory", traj)

    def _tick_control(self, now: float) -> None:
        state = self.last_state
        traj = self.last_trajectory
        if traj is not None and now - self.last_trajectory_time > 0.5:
            traj = None
        cmd = self.tracker.step(state, traj, CONTROL_PERIOD) if state is not None \
            else ActuationCommand(0.0, 0.0, fault=True)
        self._h_ctl.publish("actuation", replace(cmd, timestamp=now))

    def _tick_commander(self, now: float) -> None:
        state = self.last_state
        cmd = self.last_command
        deviation = None
        ego_s = None
        try:
            if state is not None:
                _, ego_s, deviation = locate_on_route(self.path, state.pose,
                                                      self.capture_radius)
            off_route = self._off_route
        except OffRouteError:
            off_route = True
        trajectory_ok = (self.last_trajectory is not None
                         and now - self.last_trajectory_time <= 0.5
                         and not cmd.fault)
        decision = self.commander.evaluate(
            now, state, now - self.last_detection_time, trajectory_ok, cmd,
            deviation, off_route)

        was_engaged = self.commander.engagement.mode is Mode.ENGAGED
        if was_engaged and decision.kind is DecisionKind.DISENGAGE:
            self.interventions += 1
            self.commander.disengage(now, ", ".join(decision.reasons), fault=True)
            self.commander.blackbox_record(now, self._snapshot(state, deviation),
                                           force=True)
        elif (not was_engaged and self.auto_engage and not self._operator_blocked
              and self.commander.engagement.mode is not Mode.FAULT):
            self.commander.engage(now, decision, route_loaded=trajectory_ok)

        self.plant_command = self.commander.gate_command(
            replace(cmd, timestamp=now), CONTROL_PERIOD)

        clearance = self.world.ego_clearance()
        if clearance < 0.0 and self.commander.engagement.mode is Mode.ENGAGED:
            self.collisions += 1

        self._record_metrics(now, state, ego_s, deviation)
        self.commander.blackbox_record(now, self._snapshot(state, deviation))

    # --------------------------------------------------------------- metrics

    def _ground_truth_lead(self, ego_s: float):
        """(gap, v_front) against the nearest in-corridor object, else None."""
        front_s = ego_s + self.geometry.front_edge_offset
        best = None
        for agent in self.world.agents:
            obj = agent.detected_object()
            if obj is None:
                continue
            rear = math.inf
            in_lane = False
            for c in obj.circles:
                s, lat, _ = self.path.project(np.array([c.x, c.y]))
                if abs(lat) <= 1.75:
                    in_lane = True
                    rear = min(rear, s - c.radius)
            if not in_lane or rear <= front_s:
                continue
            gap = rear - front_s
            if best is None or gap < best[0]:
                best = (gap, max(obj.speed, 0.0))
        return best

    def _active_light(self, ego_s: float):
        """Nearest upcoming light: (site, distance-to-stop, true color)."""
        front_s = ego_s + self.geometry.front_edge_offset
        controllers = {a.site_id: a for a in self.world.agents
                       if isinstance(a, TrafficLightAgent)}
        upcoming = [(site, s) for site, s in self.path.lights if s >= front_s - 0.5]
        if not upcoming:
            return None
        site, s = min(upcoming, key=lambda t: t[1])
        ctrl = controllers.get(site.id)
        color = ctrl.color_at(self.world.time) if ctrl else LightColor.GREEN
        return site, s - front_s, color

    def _note_light_detections(self, state, snapshot: dict) -> None:
        for site, s in self.path.lights:
            if site.id in self.metrics.light_detection_distances:
                continue
            if snapshot.get(site.id, LightColor.UNKNOWN) is not LightColor.UNKNOWN:
                _, ego_s, _ = locate_on_route(self.path, state.pose,
                                              self.capture_radius)
                self.metrics.light_detection_distances[site.id] = max(s - ego_s, 0.0)

    def _record_metrics(self, now: float, state, ego_s, deviation) -> None:
        if state is None or ego_s is None:
            return
        lead = self._ground_truth_lead(ego_s)
        if lead is not None:
            gap, v_f = lead
            from ..planner.rss import rss_min_distance
            d_min = rss_min_distance(state.speed, v_f, self.rss)
        else:
            gap, d_min = math.inf, 0.0
        light = self._active_light(ego_s)
        if light is not None:
            _, stop_gap, color = light
            light_name = color.value
            if color is not LightColor.RED:
                stop_gap = math.inf
        else:
            light_name, stop_gap = "none", math.inf
        self._stop_gap = stop_gap
        self.metrics.add_row(
            t=now, x=state.pose.x, y=state.pose.y, speed=state.speed,
            deviation=deviation if deviation is not None else 0.0,
            mode=self.commander.engagement.mode.value,
            light=light_name, gap=gap, d_min=d_min,
            speed_limit=float(self.path.limit_at(ego_s)),
            stop_gap=stop_gap)

    def _snapshot(self, state, deviation) -> dict:
        if state is None:
            return {}
        return {
            "x": round(state.pose.x, 4), "y": round(state.pose.y, 4),
            "speed": round(state.speed, 4),
            "steering": round(self.plant_command.steering_angle, 5),
            "throttle": round(self.plant_command.throttle, 5),
            "deviation": round(deviation, 4) if deviation is not None else None,
        }

    # ------------------------------------------------------------ telemetry

    def _telemetry_frame(self) -> dict:
        ego = self.world.ego
        traj = self.last_trajectory
        objects = []
        for agent in self.world.agents:
            obj = agent.detected_object()
            if obj is None:
                continue
            objects.append({
                "id": obj.id, "speed": round(obj.speed, 3),
                "circles": [[round(c.x, 3), round(c.y, 3), c.radius]
                            for c in obj.circles],
            })
        return {
            "t": round(self.world.time, 4),
            "state": {"x": round(ego.x, 3), "y": round(ego.y, 3),
                      "heading": round(ego.heading, 4),
                      "speed": round(ego.speed, 3)},
            "trajectory": [[round(float(x), 3), round(float(y), 3)]
                           for x, y in zip(traj.x[::5], traj.y[::5])] if traj else [],
            "objects": objects,
            "engagement": {"mode": self.commander.engagement.mode.value,
                           "reason": self.commander.engagement.reason},
            "lights": {sid: c.value
                       for sid, c in self.light_filter.snapshot(self.world.time).items()},
            "aggregates": self._cached_aggregates(),
        }

    def _cached_aggregates(self) -> dict:
        # recompute at most once per simulated second; aggregates scan the
        # whole series and would dominate the frame rate otherwise
        now = self.world.time
        if self._agg_cache is None or now - self._agg_cache[0] >= 1.0:
            agg = self.metrics.aggregates() if self.metrics.rows else {}
            self._agg_cache = (now, agg)
        return self._agg_cache[1]

    def _engagement_dict(self) -> dict:
        e = self.commander.engagement
        return {"mode": e.mode.value, "reason": e.reason, "timestamp": e.timestamp}

    def _apply_operator_commands(self) -> None:
        if self.telemetry is None:
            return
        now = self.world.time
        for command, client in self.telemetry.pending_commands():
            kind = command.get("kind")
            ok, message = True, ""
            if kind == "engage":
                self._operator_blocked = False
                decision = self.commander.evaluate(
                    now, self.last_state, now - self.last_detection_time,
                    self.last_trajectory is not None, None, None, self._off_route)
                self.commander.release_fault(now)
                self.commander.engage(now, decision,
                                      route_loaded=self.last_trajectory is not None)
                ok = self.commander.engagement.mode is Mode.ENGAGED
                message = self.commander.engagement.reason
            elif kind == "disengage":
                self._operator_blocked = True
                self.commander.disengage(now, "operator disengage")
            elif kind == "override":
                # operator priority: commander leaves autonomous mode first
                self._operator_blocked = True
                if self.commander.engagement.mode is Mode.ENGAGED:
                    self.commander.disengage(now, "operator override")
                self.commander.manual_command = ActuationCommand(
                    steering_angle=float(command.get("steering", 0.0)),
                    throttle=float(command.get("throttle", 0.0)),
                    timestamp=now)
            elif kind == "spawn_agent":
                try:
                    agent_doc = dict(command.get("agent") or {})
                    script = AgentScript(
                        agent_id=str(agent_doc.pop("id", f"op_{now:.2f}")),
                        behavior=str(agent_doc.pop("behavior", "static")),
                        params=agent_doc)
                    spec = ScenarioSpec(name="op", map_path="", ego_start_segment="",
                                        ego_goal_segment="", agents=[script])
                    new_agents = build_agents(spec, self.graph)
                    for a in new_agents:
                        a.active = True
                    self.world.agents.extend(new_agents)
                except (ScenarioError, KeyError, ValueError) as exc:
                    ok, message = False, str(exc)
            elif kind == "set_light":
                site = str(command.get("site", ""))
                try:
                    color = LightColor(str(command.get("color", "red")))
                except ValueError:
                    ok, message = False, f"unknown color {command.get('color')!r}"
                else:
                    ctrl = next((a for a in self.world.agents
                                 if isinstance(a, TrafficLightAgent)
                                 and a.site_id == site), None)
                    if ctrl is None:
                        if site not in self.graph.lights:
                            ok, message = False, f"unknown site {site!r}"
                        else:
                            script = AgentScript(agent_id=f"op_light_{site}",
                                                 behavior="traffic_light",
                                                 params={"site": site,
                                                         "schedule": [[color.value, 1.0]]})
                            self.world.agents.append(
                                TrafficLightAgent(script, self.graph))
                    else:
                        ctrl.phases = [(color, 1.0)]
                        ctrl.cycle = 1.0
            else:
                ok, message = False, f"unknown command kind {kind!r}"
            self.telemetry.ack(client, command, ok, self._engagement_dict(), message)

    # ----------------------------------------------------------------- events

    def _apply_events(self, now: float) -> None:
        for event in self.spec.events:
            t = float(event.get("time", 0.0))
            if not (now - WORLD_DT / 2 <= t < now + WORLD_DT / 2):
                continue
            action = event.get("action")
            if action == "freeze_localization":
                self.world.localization_frozen = True
            elif action == "unfreeze_localization":
                self.world.localization_frozen = False
                self.world._frozen_state = None
            elif action == "set_covariance":
                self.world.covariance_override = float(event.get("stddev", 0.5))
            elif action == "clear_covariance":
                self.world.covariance_override = None
            elif action == "teleport":
                self.world.teleport_ego(self.world.ego.x + float(event.get("dx", 0.0)),
                                        self.world.ego.y + float(event.get("dy", 0.0)))
            elif action == "disengage":
                self._operator_blocked = True
                self.commander.disengage(now, "scripted disengage")
            else:
                raise ScenarioError(f"unknown event action {action!r}")

    # ------------------------------------------------------------------- run

    def run(self) -> SessionResult:
        steps = int(round(self.spec.duration / WORLD_DT))
        next_frame = 0.0
        wall_start = _time.monotonic()
        completed = False
        try:
            for _ in range(steps):
                self._apply_operator_commands()
                self._apply_events(self.world.time)
                self.stack.advance(WORLD_DT)
                self.world.step(WORLD_DT, self.plant_command)
                if self.telemetry is not None and self.world.time >= next_frame:
                    self.telemetry.broadcast(self._telemetry_frame())
                    next_frame += TELEMETRY_PERIOD
                if self.realtime:
                    lag = self.world.time - (_time.monotonic() - wall_start)
                    if lag > 0:
                        _time.sleep(lag)
                if self._reached_goal():
                    completed = True
                    break
            else:
                completed = self._reached_goal()
        finally:
            self.stack.shutdown()
            if self._blackbox_file is not None:
                self._blackbox_file.close()
            if self.telemetry is not None:
                self.telemetry.close()
        self.metrics.completed = completed
        return SessionResult(
            metrics=self.metrics,
            aggregates=self.metrics.aggregates(),
            collisions=self.collisions,
            interventions=self.interventions,
            completed=completed,
        )

    def _reached_goal(self) -> bool:
        try:
            _, s, _ = locate_on_route(
                self.path, Pose2D(self.world.ego.x, self.world.ego.y),
                self.capture_radius)
        except OffRouteError:
            return False
        return s >= self.path.length - 3.0 and self.world.ego.speed < 0.2
