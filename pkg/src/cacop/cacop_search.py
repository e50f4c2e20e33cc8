"""Feasible pass search over the leader's discretised kick actions.

For every kick action the ball trajectory is predicted from the leader's
spot, and every other robot's earliest interception is computed assuming it
moves optimally. A (kick, teammate) pair is feasible when the teammate gets
to the ball strictly before every opponent, by more than ``margin_min``.

The work is data parallel over actions: each action is an independent unit,
chunks of actions are handed to threads running a compiled, GIL-free kernel,
and every chunk writes only its own rows of the output. The result therefore
does not depend on the worker count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .ball_model import MAX_KICK_SPEED, BallPhysicsParams, BallState, KickMode, arc_at, kick
from .geometry import Field
from .interception import (
    DEFAULT_DT,
    DEFAULT_HORIZON,
    InterceptSolution,
    n_steps,
    scan_intercept,
    solution_from_step,
)
from .kinematics import RobotLimits, RobotState, Team, Vec2
from .scoring import feature_matrix

TWO_PI = 2.0 * math.pi

# kernel sentinels
INFEASIBLE = -1
PRUNED = -2


@dataclass(frozen=True)
class KickAction:
    mode: KickMode
    direction: float
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "mode", KickMode(self.mode))
        if not 0 < self.speed <= MAX_KICK_SPEED:
            raise ValueError(f"kick speed must lie in (0, {MAX_KICK_SPEED}]")
        if not 0 <= self.direction < TWO_PI:
            raise ValueError("direction must lie in [0, 2*pi)")


@dataclass(frozen=True)
class ActionGrid:
    n_directions: int = 128
    n_speeds: int = 16
    modes: tuple[KickMode, ...] = (KickMode.FLAT, KickMode.CHIP)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(KickMode(m) for m in self.modes))
        if self.n_directions < 1 or self.n_speeds < 1 or not self.modes:
            raise ValueError("action grid needs at least one direction, speed and mode")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("duplicate kick modes")

    def __len__(self) -> int:
        return self.n_directions * self.n_speeds * len(self.modes)


def enumerate_actions(grid: ActionGrid = ActionGrid()) -> list[KickAction]:
    """All actions, mode-major, then direction, then speed."""
    return [
        KickAction(mode, TWO_PI * j / grid.n_directions, MAX_KICK_SPEED * (i + 1) / grid.n_speeds)
        for mode in grid.modes
        for j in range(grid.n_directions)
        for i in range(grid.n_speeds)
    ]


@lru_cache(maxsize=32)
def _action_table(grid: ActionGrid, params: BallPhysicsParams) -> tuple[list[KickAction], np.ndarray]:
    """Per-action trajectory constants relative to a kick from the origin.

    Columns: heading x, heading y, t_air, v_air, v_roll, t_stop, s_stop, decel.
    Built through the scalar trajectory code so both paths agree bit for bit.
    """
    actions = enumerate_actions(grid)
    table = np.empty((len(actions), 8))
    for n, a in enumerate(actions):
        traj = kick((0.0, 0.0), a.mode, a.direction, a.speed, params)
        table[n, :2] = traj.heading
        table[n, 2:] = traj.kernel_args()
    table.setflags(write=False)
    return actions, table


@dataclass(frozen=True)
class WorldSnapshot:
    ball: BallState
    robots: tuple[RobotState, ...]
    leader_id: int
    field: Field = Field()
    limits: Mapping[Team, RobotLimits] = dataclasses.field(
        default_factory=lambda: {Team.OURS: RobotLimits(), Team.THEIRS: RobotLimits()}
    )
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(self.robots))
        ids = [r.id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise ValueError("robot ids must be unique")
        leaders = [r for r in self.robots if r.id == self.leader_id]
        if len(leaders) != 1 or leaders[0].team is not Team.OURS:
            raise ValueError(f"leader {self.leader_id} must be exactly one robot on our team")
        for r in self.robots:
            r.check_speed(self.limits_for(r))

    def limits_for(self, robot: RobotState) -> RobotLimits:
        return self.limits[robot.team]

    @property
    def leader(self) -> RobotState:
        return self.robot(self.leader_id)

    def robot(self, rid: int) -> RobotState:
        for r in self.robots:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def others(self) -> list[RobotState]:
        """Non-leader robots, opponents first, each team in id order."""
        opp = sorted((r for r in self.robots if r.team is Team.THEIRS), key=lambda r: r.id)
        mates = sorted((r for r in self.robots if r.team is Team.OURS and r.id != self.leader_id),
                       key=lambda r: r.id)
        return opp + mates


@dataclass(frozen=True)
class Cacop:
    """A kick action paired with the teammate that receives it."""

    action: KickAction
    action_index: int
    receiver_id: int
    receiver_solution: InterceptSolution
    opponent_margin: float
    features: np.ndarray = dataclasses.field(compare=False)


@njit(cache=True, nogil=True)
def _search_kernel(lo, hi, table, origin, robots, lim, n_opp, dt, k_max,
                   half_len, half_wid, prune, out_k, out_p, out_iters):
    ox, oy = origin[0], origin[1]
    n_rob = robots.shape[0]
    for a in range(lo, hi):
        hx, hy = table[a, 0], table[a, 1]
        t_air, v_air, v_roll = table[a, 2], table[a, 3], table[a, 4]
        t_stop, s_stop, decel = table[a, 5], table[a, 6], table[a, 7]
        iters = 0
        best_opp = -1
        cap = k_max
        for j in range(n_rob):
            if prune and j == n_opp:
                # a teammate only counts if strictly earlier than every opponent
                cap = best_opp - 1 if best_opp >= 0 else k_max
            if prune and cap < 0:
                out_k[a, j] = PRUNED
                continue
            k, it = scan_intercept(
                ox, oy, hx, hy, t_air, v_air, v_roll, t_stop, s_stop, decel,
                robots[j, 0], robots[j, 1], robots[j, 2], robots[j, 3], lim[j, 0], lim[j, 1],
                dt, cap, half_len, half_wid,
            )
            iters += it
            if k >= 0:
                s = arc_at(k * dt, t_air, v_air, v_roll, t_stop, s_stop, decel)
                out_p[a, j, 0] = ox + hx * s
                out_p[a, j, 1] = oy + hy * s
                if j < n_opp and (best_opp < 0 or k < best_opp):
                    best_opp = k
                if prune and j < n_opp:
                    # later opponents only matter if earlier still
                    cap = k - 1
            elif cap < k_max:
                k = PRUNED
            out_k[a, j] = k
        out_iters[a] = iters


@dataclass
class FeasibleSet:
    """Feasible passes of one frame as parallel arrays, in canonical order."""

    actions: list[KickAction]
    action_index: np.ndarray
    receiver_id: np.ndarray
    step: np.ndarray
    t_best: np.ndarray
    point: np.ndarray
    margin: np.ndarray
    features: np.ndarray
    iterations: int
    dt: float

    def __len__(self) -> int:
        return len(self.action_index)

    def cacops(self) -> list[Cacop]:
        out = []
        for n in range(len(self)):
            rid = int(self.receiver_id[n])
            sol = InterceptSolution(rid, True, Vec2(*self.point[n]), float(self.t_best[n]), int(self.step[n]))
            a = int(self.action_index[n])
            out.append(Cacop(self.actions[a], a, rid, sol, float(self.margin[n]), self.features[n]))
        return out

    def keys(self) -> list[tuple[int, int, int]]:
        return list(zip(self.action_index.tolist(), self.receiver_id.tolist(), self.step.tolist()))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _run_kernel(world, table, others, dt, horizon, prune, workers):
    n_act = table.shape[0]
    robots = np.array([[*r.position, *r.velocity] for r in others]).reshape(-1, 4)
    lim = np.array([[world.limits_for(r).v_axis, world.limits_for(r).a_axis] for r in others]).reshape(-1, 2)
    n_opp = sum(r.team is Team.THEIRS for r in others)
    origin = np.array(world.leader.position)
    out_k = np.full((n_act, len(others)), INFEASIBLE, dtype=np.int64)
    out_p = np.full((n_act, len(others), 2), np.nan)
    iters = np.zeros(n_act, dtype=np.int64)
    common = (table, origin, robots, lim, n_opp, dt, n_steps(dt, horizon),
              world.field.half_length, world.field.half_width, prune, out_k, out_p, iters)
    workers = max(1, min(int(workers), n_act))
    if workers == 1:
        _search_kernel(0, n_act, *common)
    else:
        bounds = np.linspace(0, n_act, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(lambda lh: _search_kernel(lh[0], lh[1], *common), zip(bounds[:-1], bounds[1:])))
    return out_k, out_p, iters, n_opp


def search(
    world: WorldSnapshot,
    grid: ActionGrid = ActionGrid(),
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    *,
    params: BallPhysicsParams = BallPhysicsParams(),
    margin_min: float = 0.0,
    workers: int = 1,
    prune: bool = True,
) -> FeasibleSet:
    """Build the feasible set as arrays. ``prune=False`` scans every robot fully."""
    if margin_min < 0:
        raise ValueError("margin_min must be >= 0")
    actions, table = _action_table(grid, params)
    others = world.others()
    out_k, out_p, iters, n_opp = _run_kernel(world, table, others, dt, horizon, prune, workers)

    opp_k = out_k[:, :n_opp]
    opp_hit = np.where(opp_k >= 0, opp_k, np.iinfo(np.int64).max)
    best_opp = opp_hit.min(axis=1) if n_opp else np.full(len(actions), np.iinfo(np.int64).max)
    t_opp = np.where(best_opp == np.iinfo(np.int64).max, np.inf, best_opp * dt)

    mate_k = out_k[:, n_opp:]
    mate_ids = np.array([r.id for r in others[n_opp:]], dtype=np.int64)
    a_idx, m_idx = np.nonzero(mate_k >= 0)
    steps = mate_k[a_idx, m_idx]
    t_best = steps * dt
    margin = t_opp[a_idx] - t_best
    keep = margin > margin_min
    a_idx, m_idx, steps, t_best, margin = a_idx[keep], m_idx[keep], steps[keep], t_best[keep], margin[keep]

    pts = out_p[a_idx, n_opp + m_idx]
    feats = feature_matrix(pts, t_best, margin, world.leader.position, world.field, horizon)
    return FeasibleSet(actions, a_idx.astype(np.int64), mate_ids[m_idx], steps.astype(np.int64),
                       t_best, pts, margin, feats, int(iters.sum()), dt)


def build_feasible_set(
    world: WorldSnapshot,
    grid: ActionGrid = ActionGrid(),
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    **kwargs,
) -> list[Cacop]:
    """Feasible (kick, receiver) pairs sorted by (action index, receiver id)."""
    return search(world, grid, dt, horizon, **kwargs).cacops()


def predict_outcome(
    world: WorldSnapshot,
    action: KickAction,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    params: BallPhysicsParams = BallPhysicsParams(),
) -> list[InterceptSolution]:
    """Every non-leader robot's interception of ``action``, opponents first."""
    traj = kick(world.leader.position, action.mode, action.direction, action.speed, params)
    row = np.array([[*traj.heading, *traj.kernel_args()]])
    others = world.others()
    out_k, _, _, _ = _run_kernel(world, row, others, dt, horizon, False, 1)
    return [solution_from_step(r.id, traj, int(k), dt) for r, k in zip(others, out_k[0])]


def write_feasible_set(path, fs: FeasibleSet) -> None:
    """One JSON record per pass, for plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in fs.cacops():
            fh.write(json.dumps(cacop_record(c)) + "\n")


def cacop_record(c: Cacop) -> dict:
    return {
        "mode": c.action.mode.value,
        "theta": c.action.direction,
        "v": c.action.speed,
        "receiver": c.receiver_id,
        "p_best": list(c.receiver_solution.point),
        "t_best": c.receiver_solution.time,
        "margin": c.opponent_margin if math.isfinite(c.opponent_margin) else "inf",
        "features": [float(v) for v in c.features],
    }


def read_feasible_set(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        recs = [json.loads(line) for line in fh if line.strip()]
    for r in recs:
        if r["margin"] == "inf":
            r["margin"] = math.inf
    return recs
