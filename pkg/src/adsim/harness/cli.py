"""Command line entry point: scenario runs, map linting, black-box replay.

Exit codes: 0 clean run, 1 safety violation (collision, safe-distance
violation or unplanned disengagement), 2 specification/configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from ..mapgraph import MapError, parse_vector_map
from ..simworld import ScenarioError, ScenarioSpec
from .metrics import RunMetrics, compare_golden
from .session import Session, resolve_data_path
from .telemetry import TelemetryServer


def _cmd_run(args) -> int:
    try:
        scenario_path = resolve_data_path(args.scenario, "scenarios")
        spec = ScenarioSpec.from_yaml(scenario_path.read_text(),
                                      name=scenario_path.stem)
        if args.map:
            spec.map_path = args.map
        if args.seed is not None:
            spec.seed = args.seed
        if args.duration is not None:
            spec.duration = args.duration
        session = Session(
            spec,
            telemetry_port=args.telemetry_port,
            realtime=args.realtime,
            blackbox_path=args.blackbox,
            scenario_dir=scenario_path.parent,
        )
    except (ScenarioError, MapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = session.run()
    agg = result.aggregates
    print(f"scenario {spec.name!r}: "
          f"{'completed' if result.completed else 'time limit'} "
          f"after {agg.get('duration', 0.0):.1f} s")
    print(f"  max |deviation|      {agg.get('max_abs_deviation', 0.0):.3f} m")
    print(f"  rms deviation        {agg.get('rms_deviation', 0.0):.3f} m")
    print(f"  speed violations     {agg.get('speed_limit_violations', 0)}")
    print(f"  safe-distance breaks {agg.get('rss_violations', 0)}")
    print(f"  collisions           {result.collisions}")
    print(f"  interventions        {result.interventions}")
    for sid, dist in sorted(agg.get("light_detection_distances", {}).items()):
        print(f"  light {sid}: detected at {dist:.1f} m")
    if args.metrics:
        result.metrics.save(args.metrics)
        print(f"metrics written to {args.metrics}")
    if args.golden:
        golden = RunMetrics.load(args.golden)
        report = compare_golden(result.metrics, golden,
                                {"x": 0.5, "y": 0.5, "speed": 0.5,
                                 "deviation": 0.2, "gap": 1.0, "d_min": 0.5,
                                 "speed_limit": 0.01, "stop_gap": 1.0})
        print(f"golden comparison: {'PASS' if report.passed else 'FAIL'} "
              f"({report.message})")
        if not report.passed:
            return 1
    return result.exit_code


def _cmd_maplint(args) -> int:
    try:
        path = resolve_data_path(args.map, "maps")
        graph = parse_vector_map(path.read_text())
    except (MapError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    total = sum(seg.length for seg in graph.segments.values())
    sources = [s.id for s in graph.segments.values() if not s.parent_ids]
    sinks = [s.id for s in graph.segments.values() if not s.child_ids]
    print(f"map {path.name}: OK")
    print(f"  segments        {len(graph.segments)}")
    print(f"  total length    {total:.1f} m")
    print(f"  traffic lights  {len(graph.lights)}")
    print(f"  entry segments  {sources if sources else '(closed cycle)'}")
    print(f"  exit segments   {sinks if sinks else '(closed cycle)'}")
    return 0


def _cmd_replay(args) -> int:
    path = Path(args.blackbox)
    if not path.is_file():
        print(f"error: no such file {path}", file=sys.stderr)
        return 2
    records = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                print(f"error: bad record on line {i + 1}: {exc}", file=sys.stderr)
                return 2
    if not records:
        print("black box is empty")
        return 0
    t0, t1 = records[0]["t"], records[-1]["t"]
    print(f"{len(records)} records spanning {t1 - t0:.2f} s "
          f"(t={t0:.2f} .. {t1:.2f})")
    print(f"final mode: {records[-1].get('mode')} "
          f"({records[-1].get('reason')})")
    if args.telemetry_port is not None:
        server = TelemetryServer(args.telemetry_port)
        print(f"replaying on port {server.port} at 20 Hz, ctrl-c to stop")
        try:
            for rec in records:
                server.broadcast({"type": "telemetry", "replay": True, **rec})
                time.sleep(0.05)
        except KeyboardInterrupt:
            pass
        finally:
            server.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adsim", description="autonomy stack simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario", help="scenario name or YAML path")
    p_run.add_argument("--map", help="override the scenario map")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--duration", type=float)
    p_run.add_argument("--realtime", action="store_true",
                       help="pace simulation time to the wall clock")
    p_run.add_argument("--telemetry-port", type=int, default=None)
    p_run.add_argument("--metrics", help="write the metrics file here")
    p_run.add_argument("--blackbox", help="write the black-box log here")
    p_run.add_argument("--golden", help="compare against a golden metrics file")
    p_run.set_defaults(func=_cmd_run)

    p_lint = sub.add_parser("maplint", help="validate a map and print statistics")
    p_lint.add_argument("map", help="map name or GeoJSON path")
    p_lint.set_defaults(func=_cmd_maplint)

    p_replay = sub.add_parser("replay", help="inspect or re-stream a black-box log")
    p_replay.add_argument("blackbox")
    p_replay.add_argument("--telemetry-port", type=int, default=None)
    p_replay.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
