"""Desk-scale 2D soccer simulator for pass episodes.

Robots are point masses that follow the same bang-bang profiles the planner
assumes; the ball follows the predicted trajectories exactly. A free, ground
ball is captured by a robot within ``capture_radius`` when that robot is
settled (speed under ``capture_speed``) or moving with the ball at under
``capture_speed`` relative speed. Robots may overlap.

The offence runs the planner: the leader kicks, the chosen receiver runs to
the interception point, teammates hold position. The defence either stays
frozen or marks man to man.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .ball_model import BallPhysicsParams, BallState, BallTrajectory, kick
from .cacop_search import ActionGrid, FeasibleSet, KickAction, WorldSnapshot, search
from .geometry import Field
from .interception import DEFAULT_DT, DEFAULT_HORIZON, GridSpec, InterceptGrid
from .kinematics import AxisPlan, RobotLimits, RobotState, Team, Vec2, time_to_xy
from .rl_training import Event, RewardParams, Transition, reward, write_episode_log
from .scoring import N_FEATURES, Scorer, feature_matrix

DEFENSE_POLICIES = ("mark", "frozen")


@dataclass(frozen=True)
class SimConfig:
    field: Field = Field()
    timestep: float = DEFAULT_DT
    n_ours: int = 4
    n_theirs: int = 4
    defense: str = "mark"
    seed: int = 0
    robot_radius: float = 0.09
    capture_slack: float = 0.02
    capture_speed: float = 0.5
    mark_distance: float = 0.5
    max_passes: int = 10
    limits: Mapping[Team, RobotLimits] = dataclasses.field(
        default_factory=lambda: {Team.OURS: RobotLimits(), Team.THEIRS: RobotLimits()}
    )
    ball: BallPhysicsParams = BallPhysicsParams()
    grid: ActionGrid = ActionGrid()
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    margin_min: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if not self.timestep > 0:
            raise ValueError("timestep must be > 0")
        if self.defense not in DEFENSE_POLICIES:
            raise ValueError(f"defense must be one of {DEFENSE_POLICIES}")
        if self.n_ours < 2:
            raise ValueError("need at least one teammate besides the leader")

    @property
    def capture_radius(self) -> float:
        return self.robot_radius + self.capture_slack

    @property
    def max_pass_steps(self) -> int:
        return int(math.ceil((self.horizon + 1.0) / self.timestep))


@dataclass
class _Body:
    id: int
    team: Team
    pos: list[float]
    vel: list[float]
    plan: tuple[AxisPlan, AxisPlan, int] | None = None
    target: tuple[float, float] | None = None


@dataclass
class Commands:
    """Per-robot move targets and an optional kick by the ball holder."""

    targets: dict[int, Vec2] = dataclasses.field(default_factory=dict)
    kick: KickAction | None = None


@dataclass(frozen=True)
class SimEvent:
    kind: str  # "capture" | "goal" | "out" | "kick"
    robot_id: int | None = None
    team: Team | None = None
    position: Vec2 | None = None


class Simulator:
    """Single-owner simulation; advance with :meth:`step`."""

    def __init__(self, config: SimConfig, world: WorldSnapshot):
        self.config = config
        self.step_index = 0
        self.bodies = {
            r.id: _Body(r.id, r.team, [float(r.position.x), float(r.position.y)],
                        [float(r.velocity.x), float(r.velocity.y)])
            for r in world.robots
        }
        self.holder: int | None = world.leader_id
        self.leader_id = world.leader_id
        self.traj: BallTrajectory | None = None
        self.kick_step = 0
        self.kicker: int | None = None
        self.ball_pos = list(self.bodies[world.leader_id].pos)
        self.ball_vel = [0.0, 0.0]
        self.trace: list[dict] = []
        self.record_trace = False

    @property
    def time(self) -> float:
        return self.step_index * self.config.timestep

    def limits(self, team: Team) -> RobotLimits:
        return self.config.limits[team]

    def snapshot(self) -> WorldSnapshot:
        robots = [RobotState(b.id, b.team, Vec2(*b.pos), Vec2(*b.vel)) for b in self.bodies.values()]
        leader = self.holder if self.holder is not None and self.bodies[self.holder].team is Team.OURS \
            else self.leader_id
        return WorldSnapshot(BallState(Vec2(*self.ball_pos), Vec2(*self.ball_vel)), robots, leader,
                             self.config.field, self.config.limits, self.time)

    # -- stepping ---------------------------------------------------------------

    def _command(self, body: _Body, target) -> None:
        lim = self.limits(body.team)
        tx, ty = float(target[0]), float(target[1])
        px = AxisPlan.make(body.pos[0], body.vel[0], tx, lim.v_axis, lim.a_axis)
        py = AxisPlan.make(body.pos[1], body.vel[1], ty, lim.v_axis, lim.a_axis)
        body.plan = (px, py, self.step_index)
        body.target = (tx, ty)

    def step(self, commands: Commands | None = None) -> tuple[WorldSnapshot, list[SimEvent]]:
        """Advance one timestep; returns the new frame and what happened during it."""
        events = self.advance(commands)
        return self.snapshot(), events

    def advance(self, commands: Commands | None = None) -> list[SimEvent]:
        """:meth:`step` without building the snapshot."""
        cfg = self.config
        events: list[SimEvent] = []
        if commands is not None:
            for rid, target in commands.targets.items():
                self._command(self.bodies[rid], target)
            if commands.kick is not None:
                events.append(self._kick(commands.kick))

        self.step_index += 1
        for b in self.bodies.values():
            if b.plan is None:
                continue
            px, py, n0 = b.plan
            el = (self.step_index - n0) * cfg.timestep
            (x, vx), (y, vy) = px.state(el), py.state(el)
            b.pos = [x, y]
            b.vel = [vx, vy]
            if el >= px.duration and el >= py.duration:
                b.plan = None
                b.vel = [0.0, 0.0]

        if self.holder is not None:
            h = self.bodies[self.holder]
            self.ball_pos = list(h.pos)
            self.ball_vel = list(h.vel)
        else:
            tau = (self.step_index - self.kick_step) * cfg.timestep
            self.ball_pos = list(self.traj.position_at(tau))
            self.ball_vel = list(self.traj.velocity_at(tau))
            events += self._ball_events(tau)

        if self.record_trace:
            self.trace.append(self._trace_record(events))
        return events

    def _kick(self, action: KickAction) -> SimEvent:
        if self.holder is None or self.bodies[self.holder].team is not Team.OURS:
            raise RuntimeError("kick commanded without our robot holding the ball")
        kicker = self.bodies[self.holder]
        self.traj = kick(Vec2(*kicker.pos), action.mode, action.direction, action.speed, self.config.ball)
        self.kick_step = self.step_index
        self.kicker = kicker.id
        self.holder = None
        return SimEvent("kick", kicker.id, kicker.team, Vec2(*kicker.pos))

    def _ball_events(self, tau: float) -> list[SimEvent]:
        cfg = self.config
        pos = Vec2(*self.ball_pos)
        if cfg.field.in_goal_mouth(pos):
            self.traj = None
            return [SimEvent("goal", position=pos)]
        if not cfg.field.contains(pos):
            return [SimEvent("out", position=pos)]
        if not self.traj.interceptable_at(tau):
            return []
        r = cfg.capture_radius
        best = None
        for b in sorted(self.bodies.values(), key=lambda b: b.id):
            d = math.hypot(b.pos[0] - self.ball_pos[0], b.pos[1] - self.ball_pos[1])
            if b.id == self.kicker:
                if d > r:
                    self.kicker = None  # ball has left the kicker
                continue
            if d > r:
                continue
            settled = math.hypot(*b.vel) <= cfg.capture_speed
            matched = math.hypot(b.vel[0] - self.ball_vel[0], b.vel[1] - self.ball_vel[1]) <= cfg.capture_speed
            if (settled or matched) and (best is None or d < best[0]):
                best = (d, b)
        if best is None:
            return []
        b = best[1]
        self.holder = b.id
        self.traj = None
        self.ball_pos = list(b.pos)
        self.ball_vel = list(b.vel)
        if b.team is Team.OURS:
            self.leader_id = b.id
        return [SimEvent("capture", b.id, b.team, pos)]

    def ball_stopped(self) -> bool:
        if self.traj is None:
            return True
        return (self.step_index - self.kick_step) * self.config.timestep >= self.traj.t_stop

    def _trace_record(self, events) -> dict:
        return {
            "time": self.time,
            "ball": list(map(float, self.ball_pos)),
            "robots": [
                {"id": b.id, "team": b.team.value, "position": list(map(float, b.pos)),
                 "velocity": list(map(float, b.vel))}
                for b in self.bodies.values()
            ],
            "events": [e.kind for e in events],
        }

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec) + "\n")

    # -- defence ----------------------------------------------------------------

    def defense_targets(self) -> dict[int, tuple[float, float]]:
        """Man marking: the most threatening attackers are marked first, each by its nearest free defender."""
        if self.config.defense == "frozen":
            return {}
        fld = self.config.field
        gx, gy = fld.goal_center
        attackers = sorted((b for b in self.bodies.values() if b.team is Team.OURS),
                           key=lambda b: (math.hypot(b.pos[0] - gx, b.pos[1] - gy), b.id))
        free = sorted((b for b in self.bodies.values() if b.team is Team.THEIRS), key=lambda b: b.id)
        out = {}
        for att in attackers:
            if not free:
                break
            ax, ay = att.pos
            dfd = min(free, key=lambda b: (math.hypot(b.pos[0] - ax, b.pos[1] - ay), b.id))
            free.remove(dfd)
            # stand between the attacker and the ball, or the goal for the ball holder
            fx, fy = (gx, gy) if att.id == self.holder else self.ball_pos
            n = math.hypot(fx - ax, fy - ay)
            k = self.config.mark_distance / n if n > 1e-9 else 0.0
            out[dfd.id] = (min(max(ax + (fx - ax) * k, -fld.half_length), fld.half_length),
                           min(max(ay + (fy - ay) * k, -fld.half_width), fld.half_width))
        return out

    def defense_commands(self) -> dict[int, tuple[float, float]]:
        """Retarget markers whose mark moved more than a few centimetres."""
        out = {}
        for rid, tgt in self.defense_targets().items():
            b = self.bodies[rid]
            if b.target is None or math.hypot(tgt[0] - b.target[0], tgt[1] - b.target[1]) > 0.05:
                out[rid] = tgt
        return out


# -- pass episodes ----------------------------------------------------------------


@dataclass(frozen=True)
class PassOutcome:
    event: str  # "received" | "teammate" | "lost" | "goal" | "out" | "stalled"
    position: Vec2
    receiver_id: int
    capturer_id: int | None
    steps: int


def execute_pass(sim: Simulator, action: KickAction, receiver_id: int, point) -> PassOutcome:
    """Kick, send the receiver to ``point`` and step until the pass resolves."""
    cmds = Commands(targets={receiver_id: Vec2(*point)}, kick=action)
    cmds.targets.update(sim.defense_commands())
    for n in range(1, sim.config.max_pass_steps + 1):
        events = sim.advance(cmds)
        cmds = Commands(targets=sim.defense_commands())
        for e in events:
            if e.kind == "capture":
                if e.team is Team.OURS:
                    kind = "received" if e.robot_id == receiver_id else "teammate"
                else:
                    kind = "lost"
                return PassOutcome(kind, e.position, receiver_id, e.robot_id, n)
            if e.kind in ("goal", "out"):
                return PassOutcome(e.kind, e.position, receiver_id, None, n)
        if sim.ball_stopped() and sim.holder is None and all(b.plan is None for b in sim.bodies.values()
                                                             if b.team is Team.OURS):
            break
    return PassOutcome("stalled", Vec2(*sim.ball_pos), receiver_id, None, n)


@dataclass
class EpisodeResult:
    steps: int
    terminal_event: str
    cumulative_reward: float
    rewards: list[float]
    outcomes: list[PassOutcome]
    transitions: list[Transition]
    trace: list[dict] = dataclasses.field(default_factory=list)

    @property
    def passes(self) -> int:
        return len(self.outcomes)

    @property
    def received(self) -> int:
        return sum(o.event == "received" for o in self.outcomes)

    @property
    def retained(self) -> int:
        return sum(o.event in ("received", "teammate") for o in self.outcomes)


Chooser = Callable[[np.ndarray], int]


def plan(sim: Simulator) -> FeasibleSet:
    cfg = sim.config
    return search(sim.snapshot(), cfg.grid, cfg.dt, cfg.horizon, params=cfg.ball,
                  margin_min=cfg.margin_min, workers=cfg.workers)


def outcome_reward(o: PassOutcome, params: RewardParams, fld: Field) -> tuple[float, Event, bool]:
    """Reward for one pass cycle, the scoring event, and whether the episode ends."""
    if o.event == "goal":
        return reward(o.position, Event.GOAL, params, fld), Event.GOAL, True
    if o.event in ("received", "teammate") and fld.in_penalty_area(o.position):
        return reward(o.position, Event.PENALTY_AREA, params, fld), Event.PENALTY_AREA, True
    terminal = o.event not in ("received", "teammate")
    return reward(o.position, Event.NONE, params, fld), Event.NONE, terminal


def as_chooser(scorer) -> Chooser:
    """Accept either a scorer (greedy choice) or a chooser function."""
    return scorer if callable(scorer) and not hasattr(scorer, "score_many") else greedy(scorer)


def run_pass_episode(sim: Simulator, scorer, reward_params: RewardParams = RewardParams(),
                     trace: bool = False, log_path=None, episode_id: int = 0) -> EpisodeResult:
    """Pass until a terminal event, no feasible pass, or the pass cap.

    ``scorer`` is a scorer (greedy choice) or a function from the candidate
    feature matrix to the chosen row. With ``log_path`` the episode is
    appended to that episode log.
    """
    cfg = sim.config
    choose = as_chooser(scorer)
    sim.record_trace = trace
    rewards: list[float] = []
    outcomes: list[PassOutcome] = []
    transitions: list[Transition] = []
    fs = plan(sim)
    event = "no_pass"
    while len(fs):
        i = choose(fs.features)
        a = int(fs.action_index[i])
        o = execute_pass(sim, fs.actions[a], int(fs.receiver_id[i]), fs.point[i])
        r, ev, terminal = outcome_reward(o, reward_params, cfg.field)
        outcomes.append(o)
        rewards.append(r)
        capped = len(outcomes) >= cfg.max_passes
        nxt = np.empty((0, N_FEATURES))
        chosen = fs.features[i]
        if not (terminal or capped):
            fs = plan(sim)
            nxt = fs.features
        transitions.append(Transition(chosen, r, nxt, terminal or capped))
        if terminal or capped:
            event = ev.value if ev is not Event.NONE else ("cap" if not terminal else o.event)
            break
    if log_path is not None:
        write_episode_log(log_path, [(episode_id, transitions)], append=True)
    return EpisodeResult(sim.step_index, event, float(sum(rewards)), rewards, outcomes, transitions,
                         list(sim.trace))


# -- scenarios ----------------------------------------------------------------------


def random_world(config: SimConfig, seed: int) -> WorldSnapshot:
    """Seeded attack/defence start: our leader holds the ball in our half."""
    rng = np.random.default_rng(seed)
    fld = config.field
    placed: list[RobotState] = []

    def place(rid, team, xlo, xhi):
        while True:
            p = (rng.uniform(xlo, xhi), rng.uniform(-fld.half_width + 0.5, fld.half_width - 0.5))
            if all(math.hypot(p[0] - r.position[0], p[1] - r.position[1]) >= 0.5 for r in placed):
                placed.append(RobotState(rid, team, p))
                return

    place(0, Team.OURS, -4.0, -1.0)
    for i in range(1, config.n_ours):
        place(i, Team.OURS, -3.0, fld.half_length - 1.5)
    for j in range(config.n_theirs):
        place(config.n_ours + j, Team.THEIRS, -1.0, fld.half_length - 1.0)
    return WorldSnapshot(BallState(placed[0].position), placed, 0, fld, config.limits)


class PassEpisodes:
    """Self-play episode source: episode ``i`` starts from ``random_world(seed + i)``."""

    def __init__(self, config: SimConfig, reward_params: RewardParams = RewardParams(), seed: int | None = None):
        self.config = config
        self.reward_params = reward_params
        self.seed = config.seed if seed is None else seed
        self.results: list[EpisodeResult] = []

    def play(self, choose: Chooser, episode: int) -> list[Transition]:
        sim = Simulator(self.config, random_world(self.config, self.seed + episode))
        res = run_pass_episode(sim, choose, self.reward_params)
        self.results.append(res)
        return res.transitions


@dataclass
class FourVFourReport:
    episodes: int = 0
    passes: int = 0
    received: int = 0
    retained: int = 0
    rewards: list[float] = dataclasses.field(default_factory=list)

    @property
    def retention_rate(self) -> float:
        return self.retained / self.passes if self.passes else float("nan")

    @property
    def capture_rate(self) -> float:
        return self.received / self.passes if self.passes else float("nan")

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards)) if self.rewards else float("nan")

    @property
    def mean_passes(self) -> float:
        return self.passes / self.episodes if self.episodes else float("nan")

    def to_text(self) -> str:
        return (
            f"episodes {self.episodes}\n"
            f"passes {self.passes}\n"
            f"possession_retention {self.retention_rate:.6f}\n"
            f"receiver_capture_rate {self.capture_rate:.6f}\n"
            f"mean_reward {self.mean_reward:.6f}\n"
            f"mean_passes {self.mean_passes:.6f}\n"
        )


def greedy(scorer: Scorer) -> Chooser:
    return lambda X: int(np.argmax(scorer.score_many(X)))


def uniform_random(rng: np.random.Generator) -> Chooser:
    return lambda X: int(rng.integers(len(X)))


def run_4v4(config: SimConfig, scorer: Scorer | Chooser, n_episodes: int, seed: int | None = None,
            reward_params: RewardParams = RewardParams()) -> FourVFourReport:
    """Offence plans with ``scorer`` (or a chooser function) against the configured defence."""
    choose = as_chooser(scorer)
    base = config.seed if seed is None else seed
    rep = FourVFourReport()
    for ep in range(n_episodes):
        sim = Simulator(config, random_world(config, base + ep))
        res = run_pass_episode(sim, choose, reward_params)
        rep.episodes += 1
        rep.passes += res.passes
        rep.received += res.received
        rep.retained += res.retained
        rep.rewards.append(res.cumulative_reward)
    return rep


def score_heatmap(world: WorldSnapshot, scorer: Scorer, grid: GridSpec = GridSpec(),
                  horizon: float = DEFAULT_HORIZON, margin_min: float = 0.0) -> InterceptGrid:
    """Score of a pass received at each cell centre; ``-inf`` where we would not get there first.

    The receiver is the fastest non-leader teammate to reach the cell and the
    margin is measured against the fastest opponent.
    """
    grid.validate()
    xs, ys = grid.centers()
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    t_ours = np.full(len(pts), np.inf)
    t_theirs = np.full(len(pts), np.inf)
    for r in world.robots:
        if r.id == world.leader_id:
            continue
        lim = world.limits_for(r)
        t = np.array([time_to_xy(r.position.x, r.position.y, r.velocity.x, r.velocity.y, px, py,
                                 lim.v_axis, lim.a_axis) for px, py in pts])
        if r.team is Team.OURS:
            t_ours = np.minimum(t_ours, t)
        else:
            t_theirs = np.minimum(t_theirs, t)
    margin = t_theirs - t_ours
    feasible = np.isfinite(t_ours) & (margin > margin_min)
    feats = feature_matrix(pts, np.where(np.isfinite(t_ours), t_ours, horizon), margin,
                           world.leader.position, world.field, horizon)
    scores = np.where(feasible, scorer.score_many(feats), -np.inf)
    return InterceptGrid(grid.cell_size, grid.origin, scores.reshape(X.shape))
