"""Q-learning of the pass scorer.

A state is one pass cycle, described by the chosen pass's feature vector,
and an action picks one of the feasible passes of the next cycle. The
scorer is trained with the temporal-difference rule

    Q(s, a) <- Q(s, a) + alpha * (r + gamma * max_a' Q(s', a') - Q(s, a))

as a semi-gradient step on ``0.5 * (Q(x) - target)**2`` with the target
computed from the network as it was before the step.

Experience comes from episode logs (offline) or from a simulator that plays
episodes with an epsilon-greedy choice over the feasible set (self-play).
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol, Sequence

import numpy as np

from .geometry import Field
from .scoring import N_FEATURES, QScorer

log = logging.getLogger(__name__)

LOG_FORMAT = "cacop-episode-log"
LOG_VERSION = 1
MAX_MALFORMED_FRACTION = 0.10


class Event(str, Enum):
    NONE = "none"
    PENALTY_AREA = "penalty_area"
    GOAL = "goal"


@dataclass(frozen=True)
class RewardParams:
    a: float = 4.33
    r_penalty_area: float = 10.0
    r_goal: float = 50.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("reward scale a must be > 0")


def reward(ball_pos, event: Event = Event.NONE, params: RewardParams = RewardParams(),
           field: Field = Field()) -> float:
    """Dense closeness-to-goal term plus the sparse penalty-area / goal bonus."""
    gx, gy = field.goal_center
    x = math.hypot(ball_pos[0] - gx, ball_pos[1] - gy)
    bonus = {Event.NONE: 0.0, Event.PENALTY_AREA: params.r_penalty_area, Event.GOAL: params.r_goal}
    return math.exp(-x / params.a) + bonus[Event(event)]


@dataclass
class Transition:
    state_features: np.ndarray
    reward: float
    next_candidates: np.ndarray = field(default_factory=lambda: np.empty((0, N_FEATURES)))
    terminal: bool = False

    def __post_init__(self):
        self.state_features = np.asarray(self.state_features, dtype=float).reshape(N_FEATURES)
        self.next_candidates = np.asarray(self.next_candidates, dtype=float).reshape(-1, N_FEATURES)
        if self.terminal and len(self.next_candidates):
            raise ValueError("terminal transitions carry no next candidates")


@dataclass(frozen=True)
class TrainParams:
    alpha: float = 1e-2
    gamma: float = 0.95
    capacity: int = 50_000
    batch_size: int = 64
    eps_start: float = 0.3
    eps_end: float = 0.05
    eps_decay_episodes: int = 200
    updates_per_episode: int = 16
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.batch_size < 1 or self.capacity < self.batch_size:
            raise ValueError("need capacity >= batch_size >= 1")

    def epsilon(self, episode: int) -> float:
        """Linear decay from ``eps_start`` to ``eps_end`` over ``eps_decay_episodes``."""
        if episode >= self.eps_decay_episodes:
            return self.eps_end
        return self.eps_start + episode / self.eps_decay_episodes * (self.eps_end - self.eps_start)


def td_targets(q: QScorer, batch: Sequence[Transition], gamma: float) -> np.ndarray:
    rewards = np.array([t.reward for t in batch], dtype=float)
    live = [i for i, t in enumerate(batch) if not t.terminal and len(t.next_candidates)]
    future = np.zeros(len(batch))
    if live:
        # one forward pass over every candidate, then a max per transition
        counts = [len(batch[i].next_candidates) for i in live]
        scores = q.score_many(np.concatenate([batch[i].next_candidates for i in live]))
        future[live] = np.maximum.reduceat(scores, np.cumsum([0] + counts[:-1]))
    return rewards + gamma * future


def td_update_batch(q: QScorer, batch: Sequence[Transition], params: TrainParams) -> np.ndarray:
    """One averaged semi-gradient step over ``batch``; returns the TD errors."""
    targets = td_targets(q, batch, params.gamma)
    X = np.stack([t.state_features for t in batch])
    errors = targets - q.score_many(X)
    grads = q.backward(X, -errors / len(batch))
    q.step(grads, params.alpha)
    return errors


def td_update(q: QScorer, t: Transition, params: TrainParams) -> float:
    """Apply the TD rule for one transition to ``q`` in place; returns the TD error."""
    return float(td_update_batch(q, [t], params)[0])


class ReplayBuffer:
    """Fixed-capacity experience store, oldest evicted first."""

    def __init__(self, capacity: int):
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    @property
    def capacity(self) -> int:
        return self._items.maxlen or 0

    def extend(self, items: Iterable[Transition]) -> None:
        self._items.extend(items)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


@dataclass
class TrainingReport:
    rows: list[tuple[int, float, float]] = field(default_factory=list)

    def add(self, episode: int, mean_reward: float, mean_td_error: float) -> None:
        self.rows.append((episode, mean_reward, mean_td_error))

    def to_text(self) -> str:
        lines = [f"{'episode':>8} {'mean_reward':>12} {'mean_td_error':>14}"]
        lines += [f"{e:>8d} {r:>12.6f} {d:>14.6f}" for e, r, d in self.rows]
        return "\n".join(lines) + "\n"


def _train_on(q, buffer, params, rng) -> float:
    errs = []
    for _ in range(params.updates_per_episode):
        if len(buffer) == 0:
            break
        batch = buffer.sample(min(params.batch_size, len(buffer)), rng)
        errs.append(np.abs(td_update_batch(q, batch, params)).mean())
    return float(np.mean(errs)) if errs else 0.0


# -- episode logs ---------------------------------------------------------------


class MalformedLogError(ValueError):
    pass


def transition_record(episode_id: int, step: int, t: Transition) -> dict:
    return {
        "episode_id": episode_id,
        "step": step,
        "features": t.state_features.tolist(),
        "reward": t.reward,
        "terminal": t.terminal,
        "next_candidate_features": t.next_candidates.tolist(),
    }


def write_episode_log(path, episodes: Iterable[tuple[int, Sequence[Transition]]], append: bool = False) -> None:
    """Write ``(episode_id, transitions)`` pairs; the header is written once per file."""
    path = Path(path)
    fresh = not append or not path.exists() or path.stat().st_size == 0
    with open(path, "w" if fresh else "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(json.dumps({"format": LOG_FORMAT, "version": LOG_VERSION}) + "\n")
        for ep, transitions in episodes:
            for step, t in enumerate(transitions):
                fh.write(json.dumps(transition_record(ep, step, t)) + "\n")


def _parse_record(rec) -> tuple[int, Transition]:
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    feats = rec["features"]
    nxt = rec["next_candidate_features"]
    if len(feats) != N_FEATURES or any(len(c) != N_FEATURES for c in nxt):
        raise ValueError("feature vectors must have 5 entries")
    r = float(rec["reward"])
    if not math.isfinite(r):
        raise ValueError("non-finite reward")
    return int(rec["episode_id"]), Transition(np.array(feats, dtype=float), r, np.array(nxt, dtype=float),
                                              bool(rec["terminal"]))


def read_episode_log(lines: Iterable[str]) -> list[tuple[int, list[Transition]]]:
    """Parse an episode log into episodes, in file order.

    Malformed records are skipped with a warning; more than 10% malformed
    aborts with :class:`MalformedLogError`.
    """
    it: Iterator[str] = iter(lines)
    header = next(it, None)
    try:
        head = json.loads(header) if header is not None else None
    except json.JSONDecodeError:
        head = None
    if not isinstance(head, dict) or head.get("format") != LOG_FORMAT:
        raise MalformedLogError("missing episode-log header line")
    if head.get("version") != LOG_VERSION:
        raise MalformedLogError(f"unsupported episode-log version {head.get('version')!r}")
    episodes: dict[int, list[Transition]] = {}
    total = bad = 0
    for lineno, line in enumerate(it, start=2):
        if not line.strip():
            continue
        total += 1
        try:
            ep, t = _parse_record(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            bad += 1
            log.warning("episode log line %d skipped: %s", lineno, exc)
            continue
        episodes.setdefault(ep, []).append(t)
    if total and bad / total > MAX_MALFORMED_FRACTION:
        raise MalformedLogError(f"{bad} of {total} records malformed")
    return list(episodes.items())


# external game logs plug in here: any callable turning a source into log lines
LogConverter = Callable[[object], Iterable[str]]


def open_log_lines(source) -> Iterable[str]:
    with open(source, encoding="utf-8") as fh:
        yield from fh


def run_offline(source, q: QScorer, params: TrainParams = TrainParams(),
                converter: LogConverter = open_log_lines) -> tuple[QScorer, TrainingReport]:
    """Train ``q`` in place on logged episodes, replaying them in file order."""
    rng = np.random.default_rng(params.seed)
    buffer = ReplayBuffer(params.capacity)
    report = TrainingReport()
    for ep, transitions in read_episode_log(converter(source)):
        buffer.extend(transitions)
        td = _train_on(q, buffer, params, rng)
        report.add(ep, float(np.mean([t.reward for t in transitions])), td)
    return q, report


# -- self-play ------------------------------------------------------------------


Chooser = Callable[[np.ndarray], int]


class EpisodeSource(Protocol):
    """Anything that plays one episode with a given pass chooser."""

    def play(self, choose: Chooser, episode: int) -> Sequence[Transition]: ...


def epsilon_greedy(q: QScorer, epsilon: float, rng: np.random.Generator) -> Chooser:
    """Pick among feasible candidates only: random with probability epsilon, else best."""

    def choose(candidates: np.ndarray) -> int:
        if rng.random() < epsilon:
            return int(rng.integers(len(candidates)))
        return int(np.argmax(q.score_many(candidates)))

    return choose


def run_selfplay(sim: EpisodeSource, q: QScorer, params: TrainParams = TrainParams(),
                 n_episodes: int = 100, log_path=None) -> tuple[QScorer, TrainingReport]:
    """Alternate playing one episode and a sweep of TD updates; ``q`` is trained in place."""
    rng = np.random.default_rng(params.seed)
    buffer = ReplayBuffer(params.capacity)
    report = TrainingReport()
    for ep in range(n_episodes):
        transitions = list(sim.play(epsilon_greedy(q, params.epsilon(ep), rng), ep))
        if log_path is not None:
            write_episode_log(log_path, [(ep, transitions)], append=True)
        buffer.extend(transitions)
        td = _train_on(q, buffer, params, rng)
        mean_r = float(np.mean([t.reward for t in transitions])) if transitions else 0.0
        report.add(ep, mean_r, td)
    return q, report
