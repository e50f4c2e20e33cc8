"""Command-line entry point: ``cacop {heatmap,plan,train,eval,bench}``.

All commands read the optional ``--config`` INI file; ``--seed`` and
``--workers`` override its ``[run]`` section. Result files go to the
``--out`` directory. Exit status is 0 on success, 1 on usage errors and 2
on bad input data.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .ball_model import BallState
from .cacop_search import search, write_feasible_set
from .config import Config, ConfigError, load_config, load_scenario
from .interception import GridSpec, intercept_heatmap, write_grid
from .rl_training import MalformedLogError, run_offline, run_selfplay
from .scoring import DEFAULT_LINEAR_WEIGHTS, FEATURE_NAMES, LinearScorer, QScorer
from .sim_harness import PassEpisodes, run_4v4, score_heatmap, uniform_random

log = logging.getLogger("cacop")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scorer(path):
    if path is None:
        return LinearScorer(DEFAULT_LINEAR_WEIGHTS)
    try:
        return QScorer.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read weights {path}: {exc.strerror}") from exc


# -- commands ------------------------------------------------------------------


def cmd_heatmap(args, cfg: Config) -> int:
    world = load_scenario(args.scene, cfg)
    ball = world.ball
    if args.ball_speed is not None:
        v = np.asarray(ball.velocity)
        n = float(np.hypot(*v))
        heading = v / n if n > 0 else np.array([1.0, 0.0])
        ball = BallState(ball.position, tuple(heading * args.ball_speed))
    grid = GridSpec(args.cell_size, cfg.field)
    hm = intercept_heatmap(ball, cfg.ours, cfg.physics, grid, cfg.search.dt, cfg.search.horizon,
                           cfg.run.workers)
    path = _out_dir(args) / "heatmap.grid"
    write_grid(path, hm)
    finite = np.isfinite(hm.values)
    print(f"{hm.width}x{hm.height} cells, {int((~finite).sum())} infeasible, "
          f"max time {hm.values[finite].max() if finite.any() else math.inf:.4f} s -> {path}")
    return 0


def cmd_plan(args, cfg: Config) -> int:
    world = load_scenario(args.scene, cfg)
    fs = search(world, cfg.actions, cfg.search.dt, cfg.search.horizon, params=cfg.physics,
                margin_min=cfg.search.margin_min, workers=cfg.run.workers, prune=cfg.search.prune)
    path = _out_dir(args) / "feasible.jsonl"
    write_feasible_set(path, fs)
    print(f"feasible passes: {len(fs)} -> {path}")
    if not len(fs):
        print("no feasible pass")
        return 0
    scores = _scorer(args.weights).score_many(fs.features)
    i = int(np.argmax(scores))
    a = fs.actions[int(fs.action_index[i])]
    print(f"best: {a.mode.value} theta={a.direction:.4f} v={a.speed:.4f} receiver={int(fs.receiver_id[i])} "
          f"p_best=({fs.point[i, 0]:.4f}, {fs.point[i, 1]:.4f}) t_best={fs.t_best[i]:.4f} "
          f"margin={fs.margin[i]:.4f} score={scores[i]:.6f}")
    print("  " + " ".join(f"{n}={v:.4f}" for n, v in zip(FEATURE_NAMES, fs.features[i])))
    return 0


def cmd_train(args, cfg: Config) -> int:
    out = _out_dir(args)
    train = cfg.train
    if args.seed is not None:
        train = dataclasses.replace(train, seed=args.seed)
    q = QScorer.load(args.init) if args.init else QScorer.init(rng=train.seed)
    if args.mode == "offline":
        if args.log is None:
            raise UsageError("offline training needs --log")
        try:
            q, report = run_offline(args.log, q, train)
        except OSError as exc:
            raise ConfigError(f"cannot read log {args.log}: {exc.strerror}") from exc
    else:
        log_path = out / "episodes.jsonl"
        log_path.unlink(missing_ok=True)
        sim = PassEpisodes(cfg.sim_config(), cfg.reward)
        q, report = run_selfplay(sim, q, train, args.episodes, log_path)
    q.save(out / "weights.qpw")
    (out / "weights.txt").write_text(q.to_text(), encoding="utf-8")
    (out / "train_report.txt").write_text(report.to_text(), encoding="utf-8")
    print(f"trained on {len(report.rows)} episodes -> {out / 'weights.qpw'}")
    return 0


def cmd_eval(args, cfg: Config) -> int:
    out = _out_dir(args)
    scorer = _scorer(args.weights)
    sim_cfg = cfg.sim_config(**({"defense": args.defense} if args.defense else {}))
    rep = run_4v4(sim_cfg, scorer, args.episodes)
    text = rep.to_text()
    if args.baseline:
        base = run_4v4(sim_cfg, uniform_random(np.random.default_rng(cfg.run.seed)), args.episodes)
        text += "".join(f"random_{ln}\n" for ln in base.to_text().splitlines())
    (out / "eval_report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    if args.scene:
        world = load_scenario(args.scene, cfg)
        grid = score_heatmap(world, scorer, GridSpec(args.cell_size, cfg.field), cfg.search.horizon,
                             cfg.search.margin_min)
        write_grid(out / "score.grid", grid)
        print(f"score heat map -> {out / 'score.grid'}")
    return 0


def _digest(fs) -> str:
    h = hashlib.sha256()
    for arr in (fs.action_index, fs.receiver_id, fs.step):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def cmd_bench(args, cfg: Config) -> int:
    world = load_scenario(args.scene, cfg)
    rows = []
    for workers in args.worker_counts:
        for prune in (False, True):
            kw = dict(params=cfg.physics, margin_min=cfg.search.margin_min, workers=workers, prune=prune)
            search(world, cfg.actions, cfg.search.dt, cfg.search.horizon, **kw)  # warm up
            times = []
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                fs = search(world, cfg.actions, cfg.search.dt, cfg.search.horizon, **kw)
                times.append(time.perf_counter() - t0)
            rows.append({
                "workers": workers, "prune": prune, "actions": len(cfg.actions),
                "robots": len(world.robots) - 1, "feasible": len(fs), "iterations": fs.iterations,
                "digest": _digest(fs), "median_ms": 1e3 * float(np.median(times)),
            })
    print(f"{'workers':>7} {'mode':>6} {'feasible':>8} {'iterations':>10} {'median_ms':>9}")
    for r in rows:
        print(f"{r['workers']:>7} {'pruned' if r['prune'] else 'full':>6} {r['feasible']:>8} "
              f"{r['iterations']:>10} {r['median_ms']:>9.2f}")
    payload = [{k: v for k, v in r.items() if k != "median_ms"} for r in rows]
    timings = [{"workers": r["workers"], "prune": r["prune"], "median_ms": r["median_ms"]} for r in rows]
    path = _out_dir(args) / "bench.json"
    path.write_text(json.dumps({"results": payload, "timings": timings}, indent=1) + "\n", encoding="utf-8")
    return 0


# -- parser ---------------------------------------------------------------------


def _worker_list(text: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("worker counts must be >= 1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--workers", type=int, help="override [run] workers")
    common.add_argument("--out", default=".", help="output directory (default: current)")

    p = _Parser(prog="cacop", description="Pass planning and scorer training for robot soccer.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("heatmap", parents=[common], help="interception-time grid for a moving ball")
    s.add_argument("scene")
    s.add_argument("--ball-speed", type=float, help="replace the scene's ball speed (m/s)")
    s.add_argument("--cell-size", type=float, default=0.2)
    s.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("plan", parents=[common], help="feasible passes and the best one for a scene")
    s.add_argument("scene")
    s.add_argument("--weights", help="QPW1 weight file (default: hand-set linear scorer)")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("train", parents=[common], help="train the MLP scorer")
    s.add_argument("mode", choices=("offline", "selfplay"))
    s.add_argument("--log", help="episode log for offline training")
    s.add_argument("--episodes", type=int, default=100, help="self-play episodes")
    s.add_argument("--init", help="start from these weights instead of a fresh network")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="4v4 evaluation and score heat map")
    s.add_argument("--weights")
    s.add_argument("--episodes", type=int, default=100)
    s.add_argument("--defense", choices=("mark", "frozen"))
    s.add_argument("--baseline", action="store_true", help="also run a uniform-random chooser")
    s.add_argument("--scene", help="scene for the pass-score heat map")
    s.add_argument("--cell-size", type=float, default=0.2)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", parents=[common], help="time feasible-set construction")
    s.add_argument("scene")
    s.add_argument("--worker-counts", type=_worker_list, default=[1])
    s.add_argument("--repeats", type=int, default=5)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg = load_config(args.config).with_run(args.seed, args.workers)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"cacop: error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, MalformedLogError, ValueError, OSError) as exc:
        print(f"cacop: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
