"""Traffic-light state filtering.

Raw per-frame color detections are noisy; a small per-site state machine
requires k consecutive consistent observations before the effective color
changes, and decays to UNKNOWN when observations stop arriving. UNKNOWN is
treated as red by the planner inside its stopping-decision distance.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)


class LightColor(enum.Enum):
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"
    NONE = "none"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TrafficLightObservation:
    site_id: str
    color: LightColor
    confidence: float
    timestamp: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


@dataclass
class _SiteFsm:
    effective: LightColor = LightColor.UNKNOWN
    candidate: LightColor = LightColor.UNKNOWN
    streak: int = 0
    last_seen: float = float("-inf")


class TrafficLightFilter:
    """Per-site FSM over {UNKNOWN, GREEN, YELLOW, RED}."""

    def __init__(self, site_ids, k: int = 3, timeout: float = 1.0,
                 min_confidence: float = 0.0):
        self.k = k
        self.timeout = timeout
        self.min_confidence = min_confidence
        self._sites: dict[str, _SiteFsm] = {sid: _SiteFsm() for sid in site_ids}

    def update(self, obs: TrafficLightObservation) -> LightColor:
        fsm = self._sites.get(obs.site_id)
        if fsm is None:
            log.warning("observation for unknown traffic light site %r", obs.site_id)
            return LightColor.UNKNOWN
        fsm.last_seen = obs.timestamp
        color = obs.color
        if color is LightColor.NONE or obs.confidence < self.min_confidence:
            # light seen but color undetermined: keeps the site fresh,
            # does not advance any candidate
            fsm.candidate = LightColor.UNKNOWN
            fsm.streak = 0
            return fsm.effective
        if color is fsm.effective:
            fsm.candidate = color
            fsm.streak = min(fsm.streak + 1, self.k)
            return fsm.effective
        if color is fsm.candidate:
            fsm.streak += 1
        else:
            fsm.candidate = color
            fsm.streak = 1
        if fsm.streak >= self.k:
            fsm.effective = color
        return fsm.effective

    def effective(self, site_id: str, now: float) -> LightColor:
        fsm = self._sites.get(site_id)
        if fsm is None:
            log.warning("query for unknown traffic light site %r", site_id)
            return LightColor.UNKNOWN
        if now - fsm.last_seen > self.timeout:
            fsm.effective = LightColor.UNKNOWN
            fsm.candidate = LightColor.UNKNOWN
            fsm.streak = 0
        return fsm.effective

    def snapshot(self, now: float) -> dict[str, LightColor]:
        return {sid: self.effective(sid, now) for sid in self._sites}
