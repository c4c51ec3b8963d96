"""adsim: a hardware-free autonomous driving stack and simulation kit.

Modules
-------
runtime    component framework, pub/sub bus, configuration manager
geo        WGS-84 ENU conversion, pose and vehicle state types
mapgraph   GeoJSON vector map parsing, lane-graph routing, waypoint queries
planner    sampling-based trajectory planner, safe-distance rule,
           traffic-light filtering, circle collision checks
control    pure-pursuit steering and longitudinal PID
simworld   kinematic bicycle plant, scripted agents, scenario specs
commander  engagement gate, actuation limits, black-box logging
harness    scenario runner, metrics, golden comparison, telemetry, CLI
"""

__version__ = "0.1.0"
