"""Circle-discretized obstacles and clearance computation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Circle:
    x: float
    y: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be > 0")


@dataclass
class DetectedObject:
    id: str
    circles: list[Circle]
    speed: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not self.circles:
            raise ValueError("an object needs at least one circle")

    def centers(self) -> np.ndarray:
        return np.array([[c.x, c.y] for c in self.circles])

    def radii(self) -> np.ndarray:
        return np.array([c.radius for c in self.circles])


def collision_clearance(ego_circles: list[Circle], objects: list[DetectedObject]) -> float:
    """Minimum (center distance - radii sum) over all ego/object circle pairs.

    Negative iff some pair overlaps. Returns +inf with no objects.
    """
    if not ego_circles:
        raise ValueError("need at least one ego circle")
    if not objects:
        return float("inf")
    ego_c = np.array([[c.x, c.y] for c in ego_circles])
    ego_r = np.array([c.radius for c in ego_circles])
    best = float("inf")
    for obj in objects:
        oc = obj.centers()
        orr = obj.radii()
        d = np.linalg.norm(ego_c[:, None, :] - oc[None, :, :], axis=-1)
        clear = d - ego_r[:, None] - orr[None, :]
        best = min(best, float(clear.min()))
    return best
