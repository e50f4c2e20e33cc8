"""Pass features and the two scorers (linear baseline, MLP Q-function).

Feature vector, all components normalised to [0, 1]:

    0 intercept_time       receiver interception time / horizon
    1 open_goal_angle      angle subtended by the goal mouth at the pass point / pi
    2 dist_to_goal         distance pass point -> goal centre / field diagonal
    3 shot_deflection      turn between the pass and the follow-up shot / pi
    4 opponent_margin      (earliest opponent time - receiver time) / horizon
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .geometry import Field

N_FEATURES = 5
FEATURE_NAMES = (
    "intercept_time",
    "open_goal_angle",
    "dist_to_goal",
    "shot_deflection",
    "opponent_margin",
)
MAGIC = b"QPW1"


def _angle_between(ax, ay, bx, by):
    # zero-length vectors give 0, not nan
    return np.abs(np.arctan2(ax * by - ay * bx, ax * bx + ay * by))


def feature_matrix(
    points: np.ndarray,
    t_best: np.ndarray,
    margin: np.ndarray,
    leader: Sequence[float],
    field: Field,
    horizon: float,
) -> np.ndarray:
    """Features for many pass points at once; ``points`` has shape (n, 2)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    px, py = points[:, 0], points[:, 1]
    (lx, ly), (rx, ry) = field.goal_posts
    gx, gy = field.goal_center
    out = np.empty((len(points), N_FEATURES))
    out[:, 0] = np.clip(np.asarray(t_best, dtype=float) / horizon, 0.0, 1.0)
    out[:, 1] = _angle_between(lx - px, ly - py, rx - px, ry - py) / math.pi
    out[:, 2] = np.clip(np.hypot(gx - px, gy - py) / field.diagonal, 0.0, 1.0)
    out[:, 3] = _angle_between(px - leader[0], py - leader[1], gx - px, gy - py) / math.pi
    with np.errstate(invalid="ignore"):
        out[:, 4] = np.clip(np.asarray(margin, dtype=float) / horizon, 0.0, 1.0)
    return out


def extract_features(point, t_best: float, margin: float, leader, field: Field, horizon: float) -> np.ndarray:
    """Feature vector of one pass received at ``point`` after ``t_best`` seconds."""
    return feature_matrix(np.array([point]), np.array([t_best]), np.array([margin]), leader, field, horizon)[0]


# -- scorers ------------------------------------------------------------------


class Scorer(Protocol):
    def score_many(self, X: np.ndarray) -> np.ndarray: ...


def _affine(X, W, b):
    return X @ W.T + b


@dataclass
class LinearScorer:
    """Weighted sum of features."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(N_FEATURES)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def score_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, N_FEATURES)
        return _affine(X, self.weights[None, :], 0.0)[:, 0]

    def score(self, x) -> float:
        return float(self.score_many(x)[0])


# hand-set baseline: favour quick, safe receptions near the goal with an open view
DEFAULT_LINEAR_WEIGHTS = np.array([-1.0, 2.0, -3.0, -0.5, 1.0])


def score_linear(w: LinearScorer, x) -> float:
    return w.score(x)


class ShapeError(ValueError):
    pass


@dataclass
class QScorer:
    """Fully connected network, ReLU on hidden layers, identity output.

    ``weights[i]`` has shape (out, in). ``fit_bias=False`` freezes the biases
    during training.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    fit_bias: bool = field(default=True, compare=False)

    def __post_init__(self):
        self.weights = [np.array(W, dtype=float) for W in self.weights]
        self.biases = [np.array(b, dtype=float).reshape(-1) for b in self.biases]
        if len(self.weights) == 0 or len(self.weights) != len(self.biases):
            raise ShapeError("need one bias vector per weight matrix")
        prev = N_FEATURES
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or W.shape[1] != prev or b.shape != (W.shape[0],):
                raise ShapeError(f"layer {i}: weight {W.shape} / bias {b.shape} do not chain from {prev}")
            prev = W.shape[0]
        if prev != 1:
            raise ShapeError("output layer must have a single unit")
        if not all(np.all(np.isfinite(p)) for p in self.parameters()):
            raise ValueError("non-finite parameters")

    @classmethod
    def init(cls, sizes: Sequence[int] = (N_FEATURES, 32, 32, 1), rng=None) -> "QScorer":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        Ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            Ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
            bs.append(np.zeros(fan_out))
        return cls(Ws, bs)

    @classmethod
    def linear(cls, weights, bias: float = 0.0, fit_bias: bool = True) -> "QScorer":
        return cls([np.asarray(weights, dtype=float).reshape(1, N_FEATURES)], [np.array([bias])], fit_bias)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "QScorer":
        return QScorer([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.fit_bias)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, theta: np.ndarray) -> None:
        i = 0
        for p in self.parameters():
            p[...] = theta[i:i + p.size].reshape(p.shape)
            i += p.size

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = _affine(h, W, b)
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def score_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, N_FEATURES)
        return self._forward(X)[-1][:, 0]

    def score(self, x) -> float:
        return float(self.score_many(x)[0])

    def backward(self, X: np.ndarray, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients of ``sum(dout * q(X))`` w.r.t. the parameters, in :meth:`parameters` order."""
        acts = self._forward(X)
        delta = np.asarray(dout, dtype=float).reshape(-1, 1)
        grads: list[np.ndarray] = []
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = acts[i]
            gW = delta.T @ h_in
            gb = delta.sum(axis=0)
            grads = [gW, gb] + grads
            if i > 0:
                delta = (delta @ self.weights[i]) * (acts[i] > 0.0)
        return grads

    def step(self, grads: Sequence[np.ndarray], lr: float) -> None:
        for k, (p, g) in enumerate(zip(self.parameters(), grads)):
            if k % 2 == 1 and not self.fit_bias:
                continue
            p -= lr * g

    # -- persistence --------------------------------------------------------

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        sizes = self.sizes
        buf.write(MAGIC)
        buf.write(struct.pack("<I", len(sizes)))
        buf.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for p in self.parameters():
            buf.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "QScorer":
        if data[:4] != MAGIC:
            raise ValueError("not a QPW1 weight file")
        (n,) = struct.unpack_from("<I", data, 4)
        sizes = struct.unpack_from(f"<{n}I", data, 8)
        off = 8 + 4 * n
        Ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            W = np.frombuffer(data, "<f8", fan_in * fan_out, off).reshape(fan_out, fan_in)
            off += W.nbytes
            b = np.frombuffer(data, "<f8", fan_out, off)
            off += b.nbytes
            Ws.append(W.astype(float))
            bs.append(b.astype(float))
        if off != len(data):
            raise ValueError(f"weight file has {len(data) - off} trailing bytes")
        return cls(Ws, bs)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "QScorer":
        return cls.from_bytes(Path(path).read_bytes())

    def to_text(self) -> str:
        lines = ["QPW1", " ".join(map(str, self.sizes))]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            lines.append(f"# layer {i} weight {W.shape[0]}x{W.shape[1]}")
            lines += [" ".join(repr(float(v)) for v in row) for row in W]
            lines.append(f"# layer {i} bias")
            lines.append(" ".join(repr(float(v)) for v in b))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QScorer":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if rows[0] != "QPW1":
            raise ValueError("not a QPW1 text export")
        sizes = [int(s) for s in rows[1].split()]
        it = iter(rows[2:])
        Ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            Ws.append(np.array([[float(v) for v in next(it).split()] for _ in range(fan_out)]))
            bs.append(np.array([float(v) for v in next(it).split()]))
        return cls(Ws, bs)


def score_mlp(q: QScorer, x) -> float:
    return q.score(x)


def forward_backward(q: QScorer, x, target: float) -> tuple[float, list[np.ndarray]]:
    """Loss ``0.5 * (q(x) - target)**2`` and its parameter gradients."""
    X = np.asarray(x, dtype=float).reshape(1, N_FEATURES)
    err = q.score_many(X)[0] - target
    return 0.5 * err * err, q.backward(X, np.array([err]))


def select_best(scorer: Scorer, cacops: Sequence):
    """Highest-scoring pass; ties go to the earliest in canonical order."""
    if len(cacops) == 0:
        return None
    ordered = sorted(cacops, key=lambda c: (c.action_index, c.receiver_id))
    X = np.array([c.features for c in ordered])
    return ordered[int(np.argmax(scorer.score_many(X)))]
