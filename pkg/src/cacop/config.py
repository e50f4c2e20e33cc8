"""INI configuration and scenario files.

A config file has optional sections ``[physics]``, ``[ours]``, ``[theirs]``,
``[field]``, ``[actions]``, ``[search]``, ``[sim]``, ``[train]``,
``[reward]`` and ``[run]``; keys are the field names of the matching
parameter objects. Unknown sections or keys are errors.

A scenario file describes one frame::

    [scene]
    leader = 0

    [ball]
    position = 0 4.5
    velocity = 1 0

    [robot.0]
    team = ours
    position = -2 0
    velocity = 0 0
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .ball_model import BallPhysicsParams, BallState, KickMode
from .cacop_search import ActionGrid, WorldSnapshot
from .geometry import Field
from .interception import DEFAULT_DT, DEFAULT_HORIZON
from .kinematics import RobotLimits, RobotState, Team
from .rl_training import RewardParams, TrainParams
from .sim_harness import SimConfig


class ConfigError(ValueError):
    """Bad configuration or scenario input."""


@dataclass(frozen=True)
class SearchParams:
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    margin_min: float = 0.0
    prune: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon > 0):
            raise ValueError("dt and horizon must be positive")


@dataclass(frozen=True)
class SimParams:
    timestep: float = DEFAULT_DT
    n_ours: int = 4
    n_theirs: int = 4
    defense: str = "mark"
    robot_radius: float = 0.09
    capture_slack: float = 0.02
    capture_speed: float = 0.5
    mark_distance: float = 0.5
    max_passes: int = 10


@dataclass(frozen=True)
class RunParams:
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class Config:
    physics: BallPhysicsParams = BallPhysicsParams()
    ours: RobotLimits = RobotLimits()
    theirs: RobotLimits = RobotLimits()
    field: Field = Field()
    actions: ActionGrid = ActionGrid()
    search: SearchParams = SearchParams()
    sim: SimParams = SimParams()
    train: TrainParams = TrainParams()
    reward: RewardParams = RewardParams()
    run: RunParams = RunParams()

    @property
    def limits(self) -> dict[Team, RobotLimits]:
        return {Team.OURS: self.ours, Team.THEIRS: self.theirs}

    def with_run(self, seed: int | None = None, workers: int | None = None) -> "Config":
        run = self.run
        if seed is not None:
            run = dataclasses.replace(run, seed=seed)
        if workers is not None:
            run = dataclasses.replace(run, workers=workers)
        return dataclasses.replace(self, run=run)

    def sim_config(self, **overrides) -> SimConfig:
        kw = dict(
            field=self.field, limits=self.limits, ball=self.physics, grid=self.actions,
            dt=self.search.dt, horizon=self.search.horizon, margin_min=self.search.margin_min,
            seed=self.run.seed, workers=self.run.workers, **dataclasses.asdict(self.sim),
        )
        kw.update(overrides)
        return SimConfig(**kw)


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        v = float(raw)
        if not math.isfinite(v):
            raise ConfigError(f"{key}: must be finite")
        return v
    if isinstance(default, tuple):
        return tuple(KickMode(s) for s in raw.replace(",", " ").split())
    return raw


def _section(name: str, default, items) -> object:
    known = {f.name: f for f in dataclasses.fields(default)}
    kw = {}
    for key, raw in items:
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            kw[key] = _convert(f"[{name}] {key}", raw, getattr(default, key))
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from exc
    try:
        return dataclasses.replace(default, **kw)
    except ValueError as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive
    return cp


def parse_config(text: str) -> Config:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from exc
    base = Config()
    kw = {}
    for name in cp.sections():
        if name not in {f.name for f in dataclasses.fields(Config)}:
            raise ConfigError(f"unknown section [{name}]")
        kw[name] = _section(name, getattr(base, name), cp.items(name))
    return dataclasses.replace(base, **kw)


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    try:
        return parse_config(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc


# -- scenarios ----------------------------------------------------------------


def _pair(key: str, raw: str) -> tuple[float, float]:
    parts = raw.replace(",", " ").split()
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected two numbers, got {raw!r}")
    x, y = float(parts[0]), float(parts[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ConfigError(f"{key}: must be finite")
    return x, y


def parse_scenario(text: str, config: Config = Config()) -> WorldSnapshot:
    cp = _parser()
    try:
        cp.read_string(text)
        robots = []
        for name in cp.sections():
            if name in ("scene", "ball"):
                continue
            if not name.startswith("robot."):
                raise ConfigError(f"unknown scenario section [{name}]")
            sec = cp[name]
            extra = set(sec) - {"team", "position", "velocity"}
            if extra:
                raise ConfigError(f"[{name}] unknown key {sorted(extra)[0]!r}")
            robots.append(RobotState(
                int(name.split(".", 1)[1]), Team(sec.get("team", "ours").strip()),
                _pair(f"[{name}] position", sec["position"]),
                _pair(f"[{name}] velocity", sec.get("velocity", "0 0")),
            ))
        leader = cp.getint("scene", "leader", fallback=None)
        if leader is None:
            raise ConfigError("[scene] leader is required")
        ball_sec = cp["ball"] if cp.has_section("ball") else {}
        by_id = {r.id: r for r in robots}
        if leader not in by_id:
            raise ConfigError(f"leader {leader} is not a listed robot")
        ball_pos = _pair("[ball] position", ball_sec["position"]) if "position" in ball_sec \
            else tuple(by_id[leader].position)
        ball_vel = _pair("[ball] velocity", ball_sec.get("velocity", "0 0"))
        return WorldSnapshot(BallState(ball_pos, ball_vel), robots, leader, config.field, config.limits)
    except ConfigError:
        raise
    except (configparser.Error, KeyError, ValueError) as exc:
        raise ConfigError(f"bad scenario: {str(exc).splitlines()[0]}") from exc


def load_scenario(path, config: Config = Config()) -> WorldSnapshot:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return parse_scenario(text, config)


def scenario_text(world: WorldSnapshot) -> str:
    lines = ["[scene]", f"leader = {world.leader_id}", "", "[ball]",
             f"position = {world.ball.position.x!r} {world.ball.position.y!r}",
             f"velocity = {world.ball.velocity.x!r} {world.ball.velocity.y!r}"]
    for r in world.robots:
        lines += ["", f"[robot.{r.id}]", f"team = {r.team.value}",
                  f"position = {r.position.x!r} {r.position.y!r}",
                  f"velocity = {r.velocity.x!r} {r.velocity.y!r}"]
    return "\n".join(lines) + "\n"
