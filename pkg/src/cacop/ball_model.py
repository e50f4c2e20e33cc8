"""Ball motion prediction for flat (rolling) and chip kicks.

A flat ball rolls in a straight line under constant friction deceleration.
A chip ball makes two ballistic hops along the kick heading, keeping its
horizontal speed and losing vertical speed at the bounce, then rolls like a
flat ball. While airborne it cannot be received.

Everything reduces to a scalar "arc length along the heading" function of
time, ``arc_at``; positions are ``origin + heading * arc``. The same compiled
function is used by the search kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from numba import njit

from .kinematics import Vec2

MAX_KICK_SPEED = 6.5


class KickMode(str, Enum):
    FLAT = "flat"
    CHIP = "chip"


@dataclass(frozen=True)
class BallState:
    position: Vec2
    velocity: Vec2 = Vec2(0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", Vec2(*map(float, self.position)))
        object.__setattr__(self, "velocity", Vec2(*map(float, self.velocity)))


@dataclass(frozen=True)
class BallPhysicsParams:
    roll_decel: float = 0.5
    bounce_restitution: float = 0.6
    chip_launch_angle: float = math.radians(45.0)
    gravity: float = 9.81

    def __post_init__(self):
        if not self.roll_decel > 0:
            raise ValueError("roll_decel must be > 0")
        # 0 is accepted as the no-second-hop limit
        if not 0 <= self.bounce_restitution < 1:
            raise ValueError("bounce_restitution must lie in [0, 1)")
        if not 0 < self.chip_launch_angle < math.pi / 2:
            raise ValueError("chip_launch_angle must lie in (0, pi/2)")
        if not self.gravity > 0:
            raise ValueError("gravity must be > 0")


@njit(cache=True, nogil=True)
def arc_at(t, t_air, v_air, v_roll, t_stop, s_stop, decel):
    """Distance travelled along the heading after ``t`` seconds."""
    if t >= t_stop:
        return s_stop
    if t < t_air:
        return v_air * t
    tr = t - t_air
    return v_air * t_air + v_roll * tr - 0.5 * decel * tr * tr


@dataclass(frozen=True)
class Phase:
    time: float
    position: Vec2
    speed: float


@dataclass(frozen=True)
class BallTrajectory:
    """Immutable ball prediction; evaluate with :meth:`position_at`.

    ``t_air`` is zero for flat kicks. ``v_air`` is the ground speed during the
    hops and ``v_roll`` the speed at the start of the rolling phase.
    """

    kind: KickMode
    origin: BallState
    params: BallPhysicsParams
    heading: Vec2
    t_air: float
    v_air: float
    v_roll: float
    t_first_drop: float = 0.0
    phases: tuple[Phase, ...] = field(default=(), compare=False)

    @property
    def t_stop(self) -> float:
        return self.t_air + self.v_roll / self.params.roll_decel

    @property
    def s_stop(self) -> float:
        return self.v_air * self.t_air + self.v_roll**2 / (2.0 * self.params.roll_decel)

    def kernel_args(self) -> tuple[float, ...]:
        return (self.t_air, self.v_air, self.v_roll, self.t_stop, self.s_stop, self.params.roll_decel)

    def arc_at(self, t: float) -> float:
        return float(arc_at(float(t), *self.kernel_args()))

    def position_at(self, t: float) -> Vec2:
        s = self.arc_at(t)
        o = self.origin.position
        return Vec2(o.x + self.heading.x * s, o.y + self.heading.y * s)

    def speed_at(self, t: float) -> float:
        """Ground speed."""
        if t >= self.t_stop:
            return 0.0
        if t < self.t_air:
            return self.v_air
        return self.v_roll - self.params.roll_decel * (t - self.t_air)

    def velocity_at(self, t: float) -> Vec2:
        return self.heading.scale(self.speed_at(t))

    def interceptable_at(self, t: float) -> bool:
        return t >= self.t_air

    @property
    def stop_point(self) -> Vec2:
        return self.position_at(self.t_stop)


def _with_phases(traj: BallTrajectory) -> BallTrajectory:
    times = [0.0]
    if traj.kind is KickMode.CHIP:
        times += [traj.t_first_drop, traj.t_air]
    times.append(traj.t_stop)
    phases = tuple(Phase(t, traj.position_at(t), traj.speed_at(t)) for t in times)
    object.__setattr__(traj, "phases", phases)
    return traj


def predict_flat(origin: BallState, params: BallPhysicsParams = BallPhysicsParams()) -> BallTrajectory:
    vx, vy = origin.velocity
    speed = math.hypot(vx, vy)
    heading = Vec2(vx / speed, vy / speed) if speed > 0 else Vec2(1.0, 0.0)
    return _flat(origin, speed, heading, params)


def _flat(origin, speed, heading, params):
    traj = BallTrajectory(KickMode.FLAT, origin, params, heading, 0.0, 0.0, speed)
    return _with_phases(traj)


def _check_kick_speed(speed: float) -> None:
    if not 0 < speed <= MAX_KICK_SPEED:
        raise ValueError(f"kick speed must lie in (0, {MAX_KICK_SPEED}], got {speed!r}")


def predict_chip(
    origin: BallState,
    kick_speed: float,
    direction: float,
    params: BallPhysicsParams = BallPhysicsParams(),
) -> BallTrajectory:
    """Chip kick from ``origin.position``; two hops, then rolling."""
    return kick(origin.position, KickMode.CHIP, direction, kick_speed, params)


def _chip(origin, kick_speed, heading, params):
    v_h = kick_speed * math.cos(params.chip_launch_angle)
    v_z = kick_speed * math.sin(params.chip_launch_angle)
    hop = 2.0 * v_z / params.gravity
    t_air = hop * (1.0 + params.bounce_restitution)
    origin = BallState(origin.position, heading.scale(kick_speed))
    traj = BallTrajectory(KickMode.CHIP, origin, params, heading, t_air, v_h, v_h, t_first_drop=hop)
    return _with_phases(traj)


def kick(
    position,
    mode: KickMode,
    direction: float,
    speed: float,
    params: BallPhysicsParams = BallPhysicsParams(),
) -> BallTrajectory:
    """Trajectory of a ball kicked from ``position`` (the kicker's spot)."""
    _check_kick_speed(speed)
    heading = Vec2(math.cos(direction), math.sin(direction))
    if KickMode(mode) is KickMode.FLAT:
        return _flat(BallState(position, heading.scale(speed)), speed, heading, params)
    return _chip(BallState(position), speed, heading, params)


def stationary(position, params: BallPhysicsParams = BallPhysicsParams()) -> BallTrajectory:
    return _flat(BallState(position), 0.0, Vec2(1.0, 0.0), params)
