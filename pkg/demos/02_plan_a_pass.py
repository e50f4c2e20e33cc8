"""Interception heat maps and the pass planner on a 4v4 scene.

Run with ``python demos/02_plan_a_pass.py``.
"""

# %%
from pathlib import Path

import numpy as np

from cacop.ball_model import BallState
from cacop.cacop_search import search
from cacop.config import load_scenario
from cacop.interception import GridSpec, intercept_heatmap
from cacop.scoring import DEFAULT_LINEAR_WEIGHTS, FEATURE_NAMES, LinearScorer, select_best
from cacop.sim_harness import score_heatmap

SCENES = Path(__file__).resolve().parents[1] / "scenarios"


def show(values, levels=" .:-=+*#%@"):
    """Coarse text rendering, top row is +y; infeasible cells print as 'x'."""
    finite = values[np.isfinite(values)]
    lo, hi = finite.min(), finite.max()
    for row in values[::-1]:
        idx = np.clip((row - lo) / (hi - lo + 1e-12) * (len(levels) - 1), 0, len(levels) - 1)
        print("".join("x" if not np.isfinite(v) else levels[int(i)] for v, i in zip(row, np.nan_to_num(idx))))


# %% where can a robot resting on each cell catch a ball rolling right at 4 m/s?
hm = intercept_heatmap(BallState((0.0, 4.5), (4.0, 0.0)), grid=GridSpec(0.5))
show(hm.values)

# %% the planner: every (kick, receiver) pair we reach before any opponent
world = load_scenario(SCENES / "contested.ini")
fs = search(world)
print(len(fs), "feasible passes out of", len(fs.actions), "kicks;", fs.iterations, "scan steps")

# %% pick one with the hand-weighted linear score
scorer = LinearScorer(DEFAULT_LINEAR_WEIGHTS)
best = select_best(scorer, fs.cacops())
print("kick", best.action.mode.value, f"{np.degrees(best.action.direction):.1f} deg",
      f"{best.action.speed:.2f} m/s", "to robot", best.receiver_id)
print("received at", np.round(best.receiver_solution.point, 2), f"after {best.receiver_solution.time:.3f} s,",
      f"{best.opponent_margin:.3f} s ahead of the nearest opponent")
for name, value in zip(FEATURE_NAMES, best.features):
    print(f"  {name:<22} {value:.3f}")

# %% the same score spread over the field: higher is a better place to receive
show(score_heatmap(world, scorer, GridSpec(0.5)).values)
