"""Field geometry. Origin at the field centre, we attack the goal at +x."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kinematics import Vec2


@dataclass(frozen=True)
class Field:
    length: float = 12.0
    width: float = 9.0
    goal_width: float = 1.8
    penalty_depth: float = 1.8
    penalty_width: float = 3.6

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError("field dimensions must be positive")
        if not 0 < self.goal_width <= self.width:
            raise ValueError("goal_width must lie in (0, width]")

    @property
    def half_length(self) -> float:
        return self.length / 2.0

    @property
    def half_width(self) -> float:
        return self.width / 2.0

    @property
    def diagonal(self) -> float:
        return math.hypot(self.length, self.width)

    @property
    def goal_center(self) -> Vec2:
        return Vec2(self.half_length, 0.0)

    @property
    def goal_posts(self) -> tuple[Vec2, Vec2]:
        g = self.goal_width / 2.0
        return Vec2(self.half_length, -g), Vec2(self.half_length, g)

    def contains(self, p) -> bool:
        return abs(p[0]) <= self.half_length and abs(p[1]) <= self.half_width

    def in_penalty_area(self, p) -> bool:
        """Opponent penalty area (in front of the +x goal)."""
        return (
            self.half_length - self.penalty_depth <= p[0] <= self.half_length
            and abs(p[1]) <= self.penalty_width / 2.0
        )

    def in_goal_mouth(self, p) -> bool:
        """Ball past the +x goal line between the posts."""
        return p[0] > self.half_length and abs(p[1]) <= self.goal_width / 2.0
