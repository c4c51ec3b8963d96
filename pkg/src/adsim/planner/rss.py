"""Longitudinal minimum safe distance (responsibility-sensitive safety).

d_min = [ d0 + v_r*rho + 0.5*a_max*rho^2
          + (v_r + rho*a_max)^2 / (2*beta_min) - v_f^2 / (2*beta_max) ]+

where v_r is the rear (ego) speed, v_f the front vehicle speed, a_max the
maximum acceleration and beta_min the minimum braking of the rear vehicle,
beta_max the maximum braking of the front vehicle, and [x]+ = max(x, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RssParams:
    # defaults match a 40 km/h urban operating envelope
    d0: float = 7.0          # initial offset, m
    rho: float = 0.3         # reaction time, s
    a_max: float = 2.5       # max accel of the rear vehicle, m/s^2
    beta_min: float = 1.5    # min braking of the rear vehicle, m/s^2
    beta_max: float = 9.0    # max braking of the front vehicle, m/s^2

    def __post_init__(self):
        for name in ("d0", "rho", "a_max", "beta_min", "beta_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.beta_min > self.beta_max:
            raise ValueError("beta_min must be <= beta_max")


def rss_min_distance(v_r, v_f, p: RssParams = RssParams()):
    """Minimum safe longitudinal distance in meters. Accepts scalars or arrays."""
    v_r = np.asarray(v_r, dtype=float)
    v_f = np.asarray(v_f, dtype=float)
    d = (
        p.d0
        + v_r * p.rho
        + 0.5 * p.a_max * p.rho**2
        + (v_r + p.rho * p.a_max) ** 2 / (2.0 * p.beta_min)
        - v_f**2 / (2.0 * p.beta_max)
    )
    out = np.maximum(d, 0.0)
    return float(out) if out.ndim == 0 else out
