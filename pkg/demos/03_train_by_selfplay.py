"""Train the network scorer by self-play against man-marking defenders.

A short run for illustration; ``python demos/03_train_by_selfplay.py 500``
reproduces the full-length one (a few minutes on one core).
"""

# %%
import sys

import numpy as np

from cacop.rl_training import TrainParams, run_selfplay
from cacop.scoring import QScorer
from cacop.sim_harness import PassEpisodes, SimConfig, run_4v4, uniform_random

n_episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 30
cfg = SimConfig(defense="mark")

# %% epsilon-greedy episodes feed a replay buffer; each episode is followed by TD updates
q = QScorer.init(rng=0)
q, report = run_selfplay(PassEpisodes(cfg, seed=1000), q, TrainParams(), n_episodes)
print(report.to_text().splitlines()[0])
for row in report.to_text().splitlines()[1::max(1, n_episodes // 6)][:7]:
    print(row)

# %% compare against picking a feasible pass uniformly at random, on unseen starts
# thirty episodes is too few to beat random play; with 500 the trained scorer wins clearly
trained = run_4v4(cfg, q, 20, seed=10**6)
rand = run_4v4(cfg, uniform_random(np.random.default_rng(0)), 20, seed=10**6)
print("trained:", trained.to_text().replace("\n", "  "))
print("random: ", rand.to_text().replace("\n", "  "))
