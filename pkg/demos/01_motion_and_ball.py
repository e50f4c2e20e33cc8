"""How fast a robot gets somewhere, and where a kicked ball goes.

Run with ``python demos/01_motion_and_ball.py``.
"""

# %%
import numpy as np

from cacop.ball_model import BallState, kick, predict_flat
from cacop.kinematics import RobotLimits, RobotState, Team, axis_profile, time_to_point

lim = RobotLimits()

# %% a robot at rest, a robot already moving, the same 2 m target
target = (2.0, 0.0)
still = RobotState(1, Team.OURS, (0.0, 0.0))
moving = RobotState(2, Team.OURS, (0.0, 0.0), (1.5, 0.0))
print("at rest   ", round(time_to_point(still, target, lim), 4), "s")
print("moving +x ", round(time_to_point(moving, target, lim), 4), "s")

# each axis runs accelerate / cruise / brake; the segments are (duration, acceleration)
for dur, acc in axis_profile(2.0, 0.0, lim.v_axis, lim.a_axis):
    print(f"  {dur:.4f} s at {acc:+.3f} m/s^2")

# %% a rolling ball slows down at a constant rate
roll = predict_flat(BallState((0.0, 0.0), (3.0, 0.0)))
print("flat: stops at", np.round(roll.stop_point, 3), "after", round(roll.t_stop, 3), "s")

# %% a chip flies over robots, bounces once, then rolls
chip = kick((0.0, 0.0), "chip", 0.0, 4.0)
print(f"chip: airborne for {chip.t_air:.3f} s, rolls out to {chip.stop_point.x:.3f} m")
for t in (0.2, chip.t_air, chip.t_stop):
    print(f"  t={t:.3f}  x={chip.position_at(t).x:.3f}  catchable={chip.interceptable_at(t)}")
