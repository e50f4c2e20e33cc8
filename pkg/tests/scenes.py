"""Random scene generators shared by the tests."""

import math

import numpy as np

from cacop.ball_model import BallState
from cacop.cacop_search import ActionGrid, WorldSnapshot
from cacop.kinematics import RobotLimits, RobotState, Team


def random_scene(rng: np.random.Generator, n_robots: int = 6, max_speed: float = 1.5) -> WorldSnapshot:
    """Leader (id 0) plus ``n_robots - 1`` others, at least one teammate, random velocities."""
    robots = []
    for i in range(n_robots):
        team = Team.OURS if i <= 1 or rng.random() < 0.5 else Team.THEIRS
        pos = (rng.uniform(-5.8, 5.8), rng.uniform(-4.3, 4.3))
        sp, ang = rng.uniform(0, max_speed), rng.uniform(0, 2 * math.pi)
        vel = (0.0, 0.0) if i == 0 else (sp * math.cos(ang), sp * math.sin(ang))
        robots.append(RobotState(i, team, pos, vel))
    return WorldSnapshot(BallState(robots[0].position), robots, 0)


def random_grid(rng: np.random.Generator, max_actions: int = 32) -> ActionGrid:
    while True:
        g = ActionGrid(int(rng.integers(1, 9)), int(rng.integers(1, 5)),
                       tuple(rng.permutation(["flat", "chip"])[: rng.integers(1, 3)]))
        if len(g) <= max_actions:
            return g


def oracle_inputs(world: WorldSnapshot, grid: ActionGrid):
    """Arguments for the brute-force oracle, built from raw scene data."""
    from cacop.cacop_search import enumerate_actions

    leader = world.leader.position
    robots = [(r.id, r.team is Team.OURS, tuple(r.position), tuple(r.velocity))
              for r in world.robots if r.id != world.leader_id]
    actions = [(a.mode.value, a.direction, a.speed) for a in enumerate_actions(grid)]
    lim = {True: world.limits[Team.OURS], False: world.limits[Team.THEIRS]}
    v_axis = {k: l.v_max / math.sqrt(2) for k, l in lim.items()}
    a_axis = {k: l.a_max / math.sqrt(2) for k, l in lim.items()}
    return leader, robots, actions, v_axis, a_axis


__all__ = ["random_scene", "random_grid", "oracle_inputs", "RobotLimits"]
