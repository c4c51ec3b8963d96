"""Ego vehicle geometry and actuator limits shared by planner, control and sim.

Plant parameters are placeholders for a generic compact EV; they are NOT
measured values for any particular vehicle and should be calibrated before
drawing quantitative conclusions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .planner.collision import Circle


@dataclass(frozen=True)
class VehicleGeometry:
    wheelbase: float = 2.57
    # collision discretization: circle chain along the longitudinal axis,
    # offsets measured from the rear axle
    circle_offsets: tuple[float, ...] = (0.0, 1.4, 2.8)
    circle_radius: float = 1.0
    delta_max: float = 0.55          # rad, front wheels
    steer_rate_max: float = 0.7      # rad/s, front wheels
    steering_ratio: float = 15.0     # steering wheel angle / front wheel angle

    @property
    def front_edge_offset(self) -> float:
        """Distance from the rear axle to the front bumper."""
        return max(self.circle_offsets) + self.circle_radius

    def circles_at(self, x: float, y: float, heading: float) -> list[Circle]:
        c, s = np.cos(heading), np.sin(heading)
        return [
            Circle(x + off * c, y + off * s, self.circle_radius)
            for off in self.circle_offsets
        ]
