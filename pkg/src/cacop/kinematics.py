"""Time-optimal point-mass motion for a single robot.

Each axis is an independent double integrator driven bang-bang style: full
acceleration, cruise at the speed cap, full braking. In 2D the speed and
acceleration budgets are split evenly across the axes (``/ sqrt(2)``) so the
combined vector never exceeds the robot limits, and the arrival time is the
slower of the two axes. Targets are always reached at rest.

The scalar cores are numba-compiled so the action-space search can call them
from its inner loop without leaving compiled code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from numba import njit

SQRT2 = math.sqrt(2.0)
SPEED_SLACK = 1e-6


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def scale(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


class Team(str, Enum):
    OURS = "ours"
    THEIRS = "theirs"


@dataclass(frozen=True)
class RobotLimits:
    """Motion limits of one robot; defaults are the competition robot's."""

    v_max: float = 3.0
    a_max: float = 4.5
    # rotational limits are carried for completeness, the planar model ignores them
    omega_max: float = 15.0
    alpha_max: float = 15.0

    def __post_init__(self):
        for name in ("v_max", "a_max", "omega_max", "alpha_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"RobotLimits.{name} must be positive and finite, got {value!r}")

    @property
    def v_axis(self) -> float:
        return self.v_max / SQRT2

    @property
    def a_axis(self) -> float:
        return self.a_max / SQRT2


@dataclass(frozen=True)
class RobotState:
    id: int
    team: Team
    position: Vec2
    velocity: Vec2 = Vec2(0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "team", Team(self.team))
        object.__setattr__(self, "position", Vec2(*map(float, self.position)))
        object.__setattr__(self, "velocity", Vec2(*map(float, self.velocity)))
        if not all(math.isfinite(c) for c in (*self.position, *self.velocity)):
            raise ValueError(f"robot {self.id}: non-finite state")

    def check_speed(self, limits: RobotLimits) -> None:
        if self.velocity.norm() > limits.v_max + SPEED_SLACK:
            raise ValueError(
                f"robot {self.id}: speed {self.velocity.norm():.6f} exceeds v_max {limits.v_max}"
            )


@njit(cache=True, nogil=True)
def _rest_time(d, vmax, amax):
    # rest-to-rest over d >= 0: triangle if the peak stays under the cap
    if d <= vmax * vmax / amax:
        return 2.0 * math.sqrt(d / amax)
    return d / vmax + vmax / amax


@njit(cache=True, nogil=True)
def time_1d(d, v0, vmax, amax):
    """Minimum time to cover signed displacement ``d`` and stop, from velocity ``v0``."""
    if d < 0.0:
        d = -d
        v0 = -v0
    if v0 == 0.0:
        return _rest_time(d, vmax, amax)
    if v0 < 0.0:
        # moving away: brake to rest, then a rest start from further back
        return -v0 / amax + _rest_time(d + v0 * v0 / (2.0 * amax), vmax, amax)
    stop_dist = v0 * v0 / (2.0 * amax)
    if stop_dist >= d:
        # cannot stop in time: brake to rest past the target, then come back
        return v0 / amax + _rest_time(stop_dist - d, vmax, amax)
    if v0 > vmax:
        # over the axis cap: shed speed to the cap, cruise, brake
        d1 = (v0 * v0 - vmax * vmax) / (2.0 * amax)
        cruise = (d - d1 - vmax * vmax / (2.0 * amax)) / vmax
        return (v0 - vmax) / amax + cruise + vmax / amax
    vp = math.sqrt((2.0 * amax * d + v0 * v0) / 2.0)
    if vp <= vmax:
        return (2.0 * vp - v0) / amax
    cruise = (d - (2.0 * vmax * vmax - v0 * v0) / (2.0 * amax)) / vmax
    return (2.0 * vmax - v0) / amax + cruise


@njit(cache=True, nogil=True)
def time_to_xy(px, py, vx, vy, tx, ty, v_axis, a_axis):
    tx_ = time_1d(tx - px, vx, v_axis, a_axis)
    ty_ = time_1d(ty - py, vy, v_axis, a_axis)
    return tx_ if tx_ > ty_ else ty_


def time_to_point_1d(d: float, v0: float, limits: RobotLimits) -> float:
    """One-axis arrival time using the full ``limits`` (no per-axis split)."""
    return float(time_1d(float(d), float(v0), limits.v_max, limits.a_max))


def time_to_point(start: RobotState, target, limits: RobotLimits) -> float:
    """Upper bound on the time for ``start`` to reach ``target`` and stop there."""
    return float(
        time_to_xy(
            start.position[0], start.position[1],
            start.velocity[0], start.velocity[1],
            float(target[0]), float(target[1]),
            limits.v_axis, limits.a_axis,
        )
    )


# -- explicit profiles, used by the simulator to move robots --------------------


def axis_profile(d: float, v0: float, vmax: float, amax: float) -> list[tuple[float, float]]:
    """Piecewise-constant acceleration segments ``(duration, accel)`` realising time_1d.

    The segment durations sum to ``time_1d(d, v0, vmax, amax)`` and integrate
    from ``(0, v0)`` to ``(d, 0)``.
    """
    sign = 1.0
    if d < 0.0 or (d == 0.0 and v0 < 0.0):
        sign, d, v0 = -1.0, -d, -v0
    segs: list[tuple[float, float]]
    if v0 < 0.0:
        segs = [(-v0 / amax, amax)]
        segs += _rest_profile(d + v0 * v0 / (2.0 * amax), vmax, amax)
    elif v0 > 0.0 and v0 * v0 / (2.0 * amax) >= d:
        back = v0 * v0 / (2.0 * amax) - d
        segs = [(v0 / amax, -amax)]
        segs += [(dur, -acc) for dur, acc in _rest_profile(back, vmax, amax)]
    elif v0 > vmax:
        d1 = (v0 * v0 - vmax * vmax) / (2.0 * amax)
        cruise = (d - d1 - vmax * vmax / (2.0 * amax)) / vmax
        segs = [((v0 - vmax) / amax, -amax), (cruise, 0.0), (vmax / amax, -amax)]
    else:
        vp = math.sqrt((2.0 * amax * d + v0 * v0) / 2.0)
        if vp <= vmax:
            segs = [((vp - v0) / amax, amax), (vp / amax, -amax)]
        else:
            cruise = (d - (2.0 * vmax * vmax - v0 * v0) / (2.0 * amax)) / vmax
            segs = [((vmax - v0) / amax, amax), (cruise, 0.0), (vmax / amax, -amax)]
    return [(dur, sign * acc) for dur, acc in segs if dur > 0.0]


def _rest_profile(d, vmax, amax):
    if d <= 0.0:
        return []
    if d <= vmax * vmax / amax:
        vp = math.sqrt(d * amax)
        return [(vp / amax, amax), (vp / amax, -amax)]
    return [(vmax / amax, amax), (d / vmax - vmax / amax, 0.0), (vmax / amax, -amax)]


@dataclass(frozen=True)
class AxisPlan:
    """One axis of a move: start position/velocity, target and the accel profile."""

    x0: float
    v0: float
    target: float
    segments: tuple[tuple[float, float], ...]

    @classmethod
    def make(cls, x0: float, v0: float, target: float, vmax: float, amax: float) -> "AxisPlan":
        return cls(x0, v0, target, tuple(axis_profile(target - x0, v0, vmax, amax)))

    @property
    def duration(self) -> float:
        return sum(d for d, _ in self.segments)

    def state(self, t: float) -> tuple[float, float]:
        """Position and velocity ``t`` seconds into the move."""
        x, v = self.x0, self.v0
        for dur, acc in self.segments:
            if t <= 0.0:
                break
            h = dur if t >= dur else t
            x += v * h + 0.5 * acc * h * h
            v += acc * h
            t -= h
        if t > 0.0:
            # finished: snap onto the target exactly
            return self.target, 0.0
        return x, v
