"""Piecewise-constant control schedules.

A segment holds a duration dt and the constant controls applied during it:
u0 multiplies the quadratic generator b, the vector u drives the d dipolar
generators X_i, and r drives the center Z.  A schedule is an ordered list of
segments, first segment applied first.

The JSON wire format, shared by the simulator and both physics back ends:

    {"d": 1, "segments": [{"dt": 0.1, "u0": -1.0, "u": [0.0], "r": 0.0}]}

Floats are written with 17 significant digits so files round-trip bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._json import flist, fnum


@dataclass(frozen=True, eq=False)
class ControlSegment:
    dt: float
    u0: float = 0.0
    u: np.ndarray = field(default=None)
    r: float = 0.0

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(0.0 if self.u is None else self.u, dtype=float))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "u0", float(self.u0))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "r", float(self.r))
        if not (self.dt > 0.0):
            raise ValueError(f"segment duration must be positive, got {self.dt!r}")
        if not (
            math.isfinite(self.dt)
            and math.isfinite(self.u0)
            and math.isfinite(self.r)
            and np.all(np.isfinite(u))
        ):
            raise ValueError("segment controls must be finite")

    @property
    def d(self) -> int:
        return self.u.shape[0]

    def max_amplitude(self) -> float:
        return max(abs(self.u0), float(np.max(np.abs(self.u))), abs(self.r))

    def to_json(self) -> str:
        return (
            "{"
            + f'"dt": {fnum(self.dt)}, "u0": {fnum(self.u0)}, '
            + f'"u": {flist(self.u)}, "r": {fnum(self.r)}'
            + "}"
        )


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    d: int
    segments: tuple = ()

    def __post_init__(self):
        segs = tuple(self.segments)
        for seg in segs:
            if not isinstance(seg, ControlSegment):
                raise TypeError("segments must be ControlSegment instances")
            if seg.d != self.d:
                raise ValueError(
                    f"segment has {seg.d} dipolar controls, schedule has d={self.d}"
                )
        object.__setattr__(self, "segments", segs)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __add__(self, other: "ControlSchedule") -> "ControlSchedule":
        if self.d != other.d:
            raise ValueError("cannot concatenate schedules with different d")
        return ControlSchedule(self.d, self.segments + other.segments)

    def total_time(self) -> float:
        return float(sum(seg.dt for seg in self.segments))

    def max_amplitude(self) -> float:
        if not self.segments:
            return 0.0
        return max(seg.max_amplitude() for seg in self.segments)

    def to_json(self) -> str:
        body = ", ".join(seg.to_json() for seg in self.segments)
        return f'{{"d": {self.d}, "segments": [{body}]}}'

    @staticmethod
    def from_json(text: str) -> "ControlSchedule":
        obj = json.loads(text)
        d = int(obj["d"])
        segments = []
        for raw in obj.get("segments", []):
            u = np.asarray(raw.get("u", [0.0] * d), dtype=float)
            if u.shape != (d,):
                raise ValueError(f"segment u must have length {d}")
            segments.append(
                ControlSegment(
                    dt=float(raw["dt"]),
                    u0=float(raw.get("u0", 0.0)),
                    u=u,
                    r=float(raw.get("r", 0.0)),
                )
            )
        return ControlSchedule(d, tuple(segments))

    @staticmethod
    def load(path) -> "ControlSchedule":
        with open(path, "r", encoding="utf-8") as fh:
            return ControlSchedule.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def empty(d: int = 1) -> ControlSchedule:
    return ControlSchedule(d, ())


def single(dt: float, u0: float = 0.0, u=None, r: float = 0.0, d: int = 1) -> ControlSchedule:
    u_arr = np.zeros(d) if u is None else np.asarray(u, dtype=float)
    return ControlSchedule(d, (ControlSegment(dt, u0, u_arr, r),))


def negated_controls(schedule: ControlSchedule) -> ControlSchedule:
    """Same durations, all control signs flipped (u0, u, r -> negated).

    This involution is the bridge between the group-side convention (the
    generator multiplies on the right) and the physics back ends (operators
    act on the left): the two conventions differ by exactly this sign on
    every control while the drift is shared.
    """
    return ControlSchedule(
        schedule.d,
        tuple(
            ControlSegment(seg.dt, -seg.u0, -seg.u, -seg.r) for seg in schedule.segments
        ),
    )


def reversed_segments(schedule: ControlSchedule) -> ControlSchedule:
    """Same segments in reverse order (time-ordering flip)."""
    return ControlSchedule(schedule.d, tuple(reversed(schedule.segments)))
