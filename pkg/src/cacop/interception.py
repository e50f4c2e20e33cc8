"""Earliest interception of a predicted ball by a robot.

The ball trajectory is sampled every ``dt`` seconds. At step ``k`` the ball is
at ``P_k``; the robot can intercept there if the ball is on the ground, ``P_k``
is inside the field and the robot's bang-bang arrival time ``T_k`` satisfies
``T_k <= k*dt``. The first such ``k`` gives the interception point and time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .ball_model import BallPhysicsParams, BallState, BallTrajectory, arc_at, predict_flat
from .geometry import Field
from .kinematics import RobotLimits, RobotState, Vec2, time_to_xy

DEFAULT_DT = 1.0 / 60.0
DEFAULT_HORIZON = 10.0


def n_steps(dt: float, horizon: float) -> int:
    """Index of the last sample, ``floor(horizon / dt)``."""
    if not (dt > 0 and horizon > 0):
        raise ValueError("dt and horizon must be positive")
    return int(math.floor(horizon / dt + 1e-9))


# safety margin on the skip-ahead bound, far above accumulated rounding
SKIP_EPS = 1e-9


@njit(cache=True, nogil=True)
def _rest_time(d, vmax, amax):
    if d <= vmax * vmax / amax:
        return 2.0 * math.sqrt(d / amax)
    return d / vmax + vmax / amax


@njit(cache=True, nogil=True)
def _safe_skip(gap, speed, dt, v_axis, a_axis):
    """Number of following samples that cannot be feasible.

    The ball covers at most ``speed * u`` in ``u`` seconds, and the robot can
    gain at most the rest-to-rest time over that distance (reach the old
    point, then move on), so with ``gap = T_k - k*dt`` every sample ``j``
    with ``j*dt + rest_time(speed*j*dt) < gap`` is still infeasible.
    """
    g = gap - SKIP_EPS
    if g <= dt or speed <= 0.0:
        return 0
    c = math.sqrt(speed / a_axis)
    w = -c + math.sqrt(c * c + g)
    u = w * w
    if speed * u > v_axis * v_axis / a_axis:
        u = (g - v_axis / a_axis) / (1.0 + speed / v_axis)
    j = int(u / dt)
    while j > 0 and j * dt + _rest_time(speed * j * dt, v_axis, a_axis) >= g:
        j -= 1
    return j


@njit(cache=True, nogil=True)
def scan_intercept(
    ox, oy, hx, hy, t_air, v_air, v_roll, t_stop, s_stop, decel,
    px, py, vx, vy, v_axis, a_axis,
    dt, k_max, half_len, half_wid,
):
    """First feasible sample index in ``[0, k_max]`` or -1, plus the number of samples visited.

    Exact shortcuts keep the scan short. The ground track is a ray and the
    field is convex, so once the ball has left the field it never comes back.
    Airborne samples are jumped over. A robot far behind the ball skips
    samples it provably cannot make (see ``_safe_skip``). Once the ball has
    stopped the arrival time is constant and the answer is found by rounding.
    """
    was_in = False
    iters = 0
    k = 0
    while k <= k_max:
        iters += 1
        t = k * dt
        s = arc_at(t, t_air, v_air, v_roll, t_stop, s_stop, decel)
        bx = ox + hx * s
        by = oy + hy * s
        inside = abs(bx) <= half_len and abs(by) <= half_wid
        if not inside:
            if was_in or t >= t_stop:
                return -1, iters
            k += 1
            continue
        was_in = True
        if t < t_air:
            # first on-ground sample
            kk = int(math.ceil(t_air / dt))
            while kk > k + 1 and (kk - 1) * dt >= t_air:
                kk -= 1
            while kk * dt < t_air:
                kk += 1
            k = kk
            continue
        T = time_to_xy(px, py, vx, vy, bx, by, v_axis, a_axis)
        if T <= t:
            return k, iters
        if t >= t_stop:
            kk = int(math.ceil(T / dt))
            if kk <= k:
                kk = k + 1
            while kk - 1 > k and T <= (kk - 1) * dt:
                kk -= 1
            while T > kk * dt:
                kk += 1
            if kk > k_max:
                return -1, iters
            return kk, iters
        speed = v_roll - decel * (t - t_air)
        k += 1 + _safe_skip(T - t, speed, dt, v_axis, a_axis)
    return -1, iters


def _traj_args(traj: BallTrajectory) -> tuple[float, ...]:
    o = traj.origin.position
    return (o.x, o.y, traj.heading.x, traj.heading.y, *traj.kernel_args())


@dataclass(frozen=True)
class InterceptSolution:
    robot_id: int
    feasible: bool
    point: Vec2 | None = None
    time: float | None = None
    step: int | None = None

    @classmethod
    def infeasible(cls, robot_id: int) -> "InterceptSolution":
        return cls(robot_id, False)


def solution_from_step(robot_id: int, traj: BallTrajectory, k: int, dt: float) -> InterceptSolution:
    if k < 0:
        return InterceptSolution.infeasible(robot_id)
    t = k * dt
    return InterceptSolution(robot_id, True, traj.position_at(t), t, k)


def intercept(
    robot: RobotState,
    limits: RobotLimits,
    traj: BallTrajectory,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    field: Field = Field(),
) -> InterceptSolution:
    """Earliest interception of ``traj`` by ``robot`` starting from its current state."""
    k, _ = scan_intercept(
        *_traj_args(traj),
        robot.position.x, robot.position.y, robot.velocity.x, robot.velocity.y,
        limits.v_axis, limits.a_axis,
        dt, n_steps(dt, horizon), field.half_length, field.half_width,
    )
    return solution_from_step(robot.id, traj, int(k), dt)


# -- heat maps ------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Square cells tiling the field rectangle."""

    cell_size: float = 0.2
    field: Field = Field()

    @property
    def shape(self) -> tuple[int, int]:
        ny = int(round(self.field.width / self.cell_size))
        nx = int(round(self.field.length / self.cell_size))
        return ny, nx

    @property
    def origin(self) -> tuple[float, float]:
        return -self.field.half_length, -self.field.half_width

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.shape
        x0, y0 = self.origin
        xs = x0 + (np.arange(nx) + 0.5) * self.cell_size
        ys = y0 + (np.arange(ny) + 0.5) * self.cell_size
        return xs, ys

    def validate(self) -> None:
        ny, nx = self.shape
        if nx < 4 or ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {nx}x{ny}")


@dataclass
class InterceptGrid:
    """Row-major grid of values; row 0 is the lowest y. ``inf`` marks infeasible."""

    cell_size: float
    origin: tuple[float, float]
    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size
        return xs, ys


@njit(cache=True, nogil=True)
def _heat_rows(out, rows, xs, ys, targs, v_axis, a_axis, dt, k_max, half_len, half_wid):
    for r in rows:
        for c in range(xs.shape[0]):
            k, _ = scan_intercept(
                targs[0], targs[1], targs[2], targs[3], targs[4],
                targs[5], targs[6], targs[7], targs[8], targs[9],
                xs[c], ys[r], 0.0, 0.0, v_axis, a_axis,
                dt, k_max, half_len, half_wid,
            )
            out[r, c] = np.inf if k < 0 else k * dt


def intercept_heatmap(
    ball: BallState,
    limits: RobotLimits = RobotLimits(),
    params: BallPhysicsParams = BallPhysicsParams(),
    grid: GridSpec = GridSpec(),
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    workers: int = 1,
) -> InterceptGrid:
    """Interception time for a robot resting at each cell centre.

    Cells are independent; ``workers`` threads split the rows and the result
    does not depend on how many are used.
    """
    grid.validate()
    traj = predict_flat(ball, params)
    xs, ys = grid.centers()
    out = np.empty(grid.shape)
    args = (xs, ys, np.array(_traj_args(traj)), limits.v_axis, limits.a_axis,
            dt, n_steps(dt, horizon), grid.field.half_length, grid.field.half_width)
    chunks = np.array_split(np.arange(grid.shape[0]), max(1, workers))
    if workers <= 1:
        _heat_rows(out, chunks[0], *args)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(lambda rows: _heat_rows(out, rows, *args), chunks))
    return InterceptGrid(grid.cell_size, grid.origin, out)


def write_grid(path, grid: InterceptGrid) -> None:
    """Plain-text grid: header ``width height cell_size origin_x origin_y``, then one row per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{grid.width} {grid.height} {grid.cell_size:.17g} {grid.origin[0]:.17g} {grid.origin[1]:.17g}\n")
        for row in grid.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_grid(path) -> InterceptGrid:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 5:
            raise ValueError(f"{path}: bad grid header")
        w, h = int(head[0]), int(head[1])
        values = np.loadtxt(fh, ndmin=2)
    if values.shape != (h, w):
        raise ValueError(f"{path}: expected {h}x{w} values, got {values.shape[0]}x{values.shape[1]}")
    return InterceptGrid(float(head[2]), (float(head[3]), float(head[4])), values)
