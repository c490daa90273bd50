"""Trajectory container and its CSV exchange format.

The CSV layout is ``t_s,x_nm,y_nm,z_nm`` with ``#key=value`` comment
lines carrying provenance metadata (seed, medium, temperature, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory"]

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

CSV_SCHEMA = 1


def axes_to_indices(axes: str) -> list[int]:
    """Map an axis selection string like ``"xy"`` to column indices."""
    if not axes:
        raise ValueError("axis selection must name at least one of x, y, z")
    try:
        idx = [_AXIS_INDEX[a] for a in axes]
    except KeyError as exc:
        raise ValueError(f"unknown axis {exc.args[0]!r}; use characters from 'xyz'") from None
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate axis in selection {axes!r}")
    return idx


@dataclass
class Trajectory:
    """Sampled 3D positions of one emitter.

    Parameters
    ----------
    dt : float
        Sample period in seconds.
    points : ndarray, shape (n, 3)
        Positions in nm.
    t0 : float
        Start time in seconds.
    meta : dict
        Free-form provenance tags.
    """

    dt: float
    points: np.ndarray
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        if self.points.shape[0] == 0:
            raise ValueError("trajectory has no points")
        if not np.isfinite(self.points).all():
            raise ValueError("trajectory contains non-finite coordinates")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive and finite")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.dt * (len(self) - 1)

    def axis(self, axes: str) -> np.ndarray:
        """Columns for an axis selection, shape (n, len(axes))."""
        return self.points[:, axes_to_indices(axes)]

    def slice(self, start: int, stop: int) -> "Trajectory":
        """Sub-trajectory over point indices [start, stop)."""
        pts = self.points[start:stop]
        if pts.shape[0] < 2:
            raise ValueError("slice must keep at least 2 points")
        return Trajectory(self.dt, pts.copy(), t0=self.t0 + start * self.dt, meta=dict(self.meta))

    def to_csv(self, path) -> None:
        t = self.times
        with open(path, "w", newline="") as fh:
            fh.write(f"#schema={CSV_SCHEMA}\n")
            fh.write(f"#dt_s={self.dt!r}\n")
            fh.write(f"#t0_s={self.t0!r}\n")
            for key in sorted(self.meta):
                fh.write(f"#{key}={self.meta[key]}\n")
            fh.write("t_s,x_nm,y_nm,z_nm\n")
            for i in range(len(self)):
                x, y, z = self.points[i]
                fh.write(f"{t[i]:.6f},{x:.6f},{y:.6f},{z:.6f}\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        meta: dict = {}
        rows = []
        header_seen = False
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "=" in line:
                        key, val = line[1:].split("=", 1)
                        meta[key] = val
                    continue
                if not header_seen:
                    if line != "t_s,x_nm,y_nm,z_nm":
                        raise ValueError(f"{path}: line {lineno}: unexpected header {line!r}")
                    header_seen = True
                    continue
                parts = line.split(",")
                if len(parts) != 4:
                    raise ValueError(f"{path}: line {lineno}: expected 4 columns, got {len(parts)}")
                try:
                    rows.append([float(p) for p in parts])
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: non-numeric field") from None
        if not rows:
            raise ValueError(f"{path}: no data rows")
        arr = np.asarray(rows)
        if "dt_s" in meta:
            dt = float(meta.pop("dt_s"))
        elif arr.shape[0] >= 2:
            dt = float(arr[1, 0] - arr[0, 0])
        else:
            raise ValueError(f"{path}: cannot infer dt from a single row")
        t0 = float(meta.pop("t0_s", arr[0, 0]))
        meta.pop("schema", None)
        return cls(dt=dt, points=arr[:, 1:4], t0=t0, meta=meta)
