"""Run metrics: per-tick time series, aggregates and golden comparison.

The metrics file is columnar text: a versioned header, a column line, one
row per control tick with fixed decimal formatting so reruns of a seeded
scenario are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1

COLUMNS = [
    "t", "x", "y", "speed", "deviation", "mode", "light", "gap", "d_min",
    "speed_limit", "stop_gap",
]

_MODES = {"manual": 0, "engaged": 1, "fault": 2}
_MODES_INV = {v: k for k, v in _MODES.items()}
_LIGHTS = {"none": 0, "green": 1, "yellow": 2, "red": 3, "unknown": 4}
_LIGHTS_INV = {v: k for k, v in _LIGHTS.items()}

_INF_SENTINEL = 1e9


@dataclass
class RunMetrics:
    rows: list[list[float]] = field(default_factory=list)
    light_detection_distances: dict[str, float] = field(default_factory=dict)
    completed: bool = False

    def add_row(self, t: float, x: float, y: float, speed: float,
                deviation: float, mode: str, light: str,
                gap: float, d_min: float, speed_limit: float,
                stop_gap: float) -> None:
        self.rows.append([
            t, x, y, speed, deviation, float(_MODES[mode]),
            float(_LIGHTS[light]),
            min(gap, _INF_SENTINEL), d_min, speed_limit,
            min(stop_gap, _INF_SENTINEL),
        ])

    def array(self) -> np.ndarray:
        return np.array(self.rows) if self.rows else np.zeros((0, len(COLUMNS)))

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, COLUMNS.index(name)]

    # ---------------------------------------------------------- aggregates

    def aggregates(self) -> dict:
        if not self.rows:
            return {"ticks": 0}
        a = self.array()
        dev = a[:, COLUMNS.index("deviation")]
        speed = a[:, COLUMNS.index("speed")]
        limit = a[:, COLUMNS.index("speed_limit")]
        gap = a[:, COLUMNS.index("gap")]
        d_min = a[:, COLUMNS.index("d_min")]
        mode = a[:, COLUMNS.index("mode")]
        engaged = mode == float(_MODES["engaged"])
        has_lead = gap < _INF_SENTINEL
        return {
            "ticks": len(self.rows),
            "duration": float(a[-1, 0] - a[0, 0]),
            "max_abs_deviation": float(np.abs(dev[engaged]).max()) if engaged.any() else 0.0,
            "rms_deviation": float(np.sqrt(np.mean(dev[engaged] ** 2))) if engaged.any() else 0.0,
            "speed_limit_violations": int(np.sum(speed > limit + 0.1)),
            "rss_violations": int(np.sum(engaged & has_lead & (gap < d_min))),
            "light_detection_distances": dict(self.light_detection_distances),
        }

    # ----------------------------------------------------------------- io

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# adsim-metrics v{FORMAT_VERSION}\n")
            fh.write(f"# completed={int(self.completed)}\n")
            for sid in sorted(self.light_detection_distances):
                fh.write(f"# light_detection {sid} "
                         f"{self.light_detection_distances[sid]:.3f}\n")
            fh.write("\t".join(COLUMNS) + "\n")
            for row in self.rows:
                fh.write("\t".join(f"{v:.6f}" for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "RunMetrics":
        m = cls()
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# completed="):
                    m.completed = line.endswith("1")
                elif line.startswith("# light_detection "):
                    _, _, sid, dist = line.split()
                    m.light_detection_distances[sid] = float(dist)
                elif line.startswith("#") or line.startswith("t\t"):
                    continue
                elif line:
                    m.rows.append([float(v) for v in line.split("\t")])
        return m


@dataclass
class GoldenReport:
    passed: bool
    message: str
    first_divergence: tuple[float, str, float, float] | None = None  # t, column, got, want


def compare_golden(metrics: RunMetrics, golden: RunMetrics,
                   tolerances: dict[str, float] | None = None) -> GoldenReport:
    """Pointwise comparison on the shared time grid with per-channel tolerances."""
    tol = {c: 1e-9 for c in COLUMNS}
    tol.update(tolerances or {})
    a, b = metrics.array(), golden.array()
    if a.shape[0] == 0 or b.shape[0] == 0:
        ok = a.shape[0] == b.shape[0]
        return GoldenReport(ok, "both empty" if ok else "row count mismatch")
    # resample the run onto the golden time grid
    t_a, t_b = a[:, 0], b[:, 0]
    for j, col in enumerate(COLUMNS[1:], start=1):
        want = b[:, j]
        if col in ("mode", "light"):
            idx = np.clip(np.searchsorted(t_a, t_b), 0, len(t_a) - 1)
            got = a[idx, j]
        else:
            got = np.interp(t_b, t_a, a[:, j])
        bound = tol[col]
        if math.isinf(bound):
            continue
        bad = np.abs(got - want) > bound
        if bad.any():
            i = int(np.argmax(bad))
            return GoldenReport(
                False,
                f"first divergence at t={t_b[i]:.3f}s in {col!r}: "
                f"got {got[i]:.6f}, golden {want[i]:.6f} (tol {bound})",
                (float(t_b[i]), col, float(got[i]), float(want[i])),
            )
    return GoldenReport(True, "within tolerances")
