from .rss import RssParams, rss_min_distance
from .lights import LightColor, TrafficLightObservation, TrafficLightFilter
from .collision import Circle, DetectedObject, collision_clearance
from .mppi import MppiConfig, Trajectory, MppiPlanner

__all__ = [
    "RssParams", "rss_min_distance",
    "LightColor", "TrafficLightObservation", "TrafficLightFilter",
    "Circle", "DetectedObject", "collision_clearance",
    "MppiConfig", "Trajectory", "MppiPlanner",
]
