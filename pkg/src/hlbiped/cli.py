"""Command-line entry point: ``hlbiped <command> [flags]``.

Commands write CSV tables for external plotting into ``--out`` (default:
``$HLBIPED_LOG_DIR`` or ``./hlbiped_out``). Exit codes: 0 ok, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import fields

from . import __version__
from . import experiments as ex
from .env import LOG_COLUMNS, OBS_DIM, ACT_DIM, BipedEnv, EnvConfig, InvalidConfig
from .ppo import CheckpointError, NonFiniteLoss, PPOConfig, load_checkpoint, train
from .ppo.algo import config_dict

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
LOG_DIR_ENV = "HLBIPED_LOG_DIR"
ACTION_COLUMNS = ("p_sw_T_x", "q_phi", "h_d")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def load_config(path: str | None) -> tuple[dict, dict]:
    """Split a JSON file ``{"env": {...}, "ppo": {...}}`` into override dicts."""
    if not path:
        return {}, {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict) or set(data) - {"env", "ppo"}:
        raise ConfigError("config must be an object with optional 'env' and 'ppo' sections")
    return data.get("env", {}), data.get("ppo", {})


def _build(cls, overrides: dict, **cli):
    names = {f.name for f in fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kw = dict(overrides)
    kw.update({k: v for k, v in cli.items() if v is not None})
    for k, v in kw.items():
        if isinstance(v, list):
            kw[k] = tuple(v)
    return cls(**kw)


def env_config(args, overrides: dict | None = None) -> EnvConfig:
    cfg = _build(EnvConfig, overrides or {}, robot=args.robot, controller=args.controller,
                 gains=args.gains)
    cfg.validate()
    BipedEnv(cfg)  # fails early on an unknown robot
    return cfg


def out_dir(args) -> str:
    d = args.out or os.environ.get(LOG_DIR_ENV) or "hlbiped_out"
    os.makedirs(d, exist_ok=True)
    return d


def write(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text)
    print(f"wrote {path}")


def _profile(args):
    if args.profile:
        return ex.parse_profile(args.profile)
    return list(ex.DEFAULT_PROFILE)


def _policy(args):
    if args.checkpoint is None:
        args.checkpoint = ex.bundled_policy_path(args.robot)
    return load_checkpoint(args.checkpoint)


# ---------------------------------------------------------------- commands
def cmd_train(args) -> int:
    env_over, ppo_over = load_config(args.config)
    cfg = env_config(args, env_over)
    pcfg = _build(PPOConfig, ppo_over, workers=args.workers)
    pcfg.validate()
    d = out_dir(args)
    model = BipedEnv(cfg).model
    n_out = 5 if model.fully_actuated else 4
    print(f"robot {cfg.robot}: {n_out} task outputs, observation {OBS_DIM}, action {ACT_DIM}")
    init = load_checkpoint(args.init) if args.init else None
    extra = {"init": args.init} if args.init else {}
    meta = ex.env_meta(cfg, ppo=config_dict(pcfg), seed=args.seed, iters=args.iters, **extra)
    header = f"hlbiped {__version__} config {ex.config_hash(meta)}"
    train(lambda: BipedEnv(cfg), pcfg, args.iters, seed=args.seed, out_dir=d, policy=init,
          log=print if not args.quiet else None, header=header)
    write(os.path.join(d, "config.json"), json.dumps(meta, indent=1, default=str))
    return EXIT_OK


def _summary_rows(results):
    return [(k, r.rmse, int(r.fell), r.fall_cause or "", r.max_segment_error)
            for k, r in enumerate(results)]


def cmd_eval(args) -> int:
    cfg = env_config(args)
    policy = _policy(args)
    profile = _profile(args)
    results = []
    for k in range(args.episodes):
        results.append(ex.evaluate(policy.as_env_policy(None), cfg, profile, math.radians(args.alpha),
                                   seed=args.seed + k, duration=args.duration))
    d = out_dir(args)
    meta = ex.env_meta(cfg, checkpoint=args.checkpoint, profile=profile, seed=args.seed)
    keep = [i for i, c in enumerate(LOG_COLUMNS) if args.log == "actions" or c not in ACTION_COLUMNS]
    rows = [[r[i] for i in keep] for r in results[0].log]
    write(os.path.join(d, "eval_log.csv"), ex.table_csv([LOG_COLUMNS[i] for i in keep], rows, meta))
    seg = [(k, *s) for k, r in enumerate(results) for s in r.segments]
    write(os.path.join(d, "eval_segments.csv"),
          ex.table_csv(["episode", "t0", "t1", "v_des", "mean_abs_error", "mean_v_bar"], seg, meta))
    write(os.path.join(d, "eval_summary.csv"),
          ex.table_csv(["episode", "rmse", "fell", "fall_cause", "max_segment_error"],
                       _summary_rows(results), meta))
    falls = sum(r.fell for r in results)
    print(f"episodes {len(results)} falls {falls} "
          f"mean rmse {sum(r.rmse for r in results) / len(results):.4f} m/s")
    return EXIT_OK


def cmd_alip_baseline(args) -> int:
    cfg = env_config(args)
    profile = _profile(args) if args.profile else [(0.0, args.v)]
    r = ex.alip_baseline(cfg, profile, seed=args.seed, noise=args.noise, duration=args.duration)
    d = out_dir(args)
    meta = ex.env_meta(cfg, baseline="alip", profile=profile, seed=args.seed)
    write(os.path.join(d, "alip_log.csv"), ex.table_csv(LOG_COLUMNS, r.log, meta))
    write(os.path.join(d, "alip_segments.csv"),
          ex.table_csv(["t0", "t1", "v_des", "mean_abs_error", "mean_v_bar"], r.segments, meta))
    print(f"fell {r.fell} segments " + " ".join(f"{s[2]:+.2f}:{s[3]:.3f}" for s in r.segments))
    return EXIT_OK


def cmd_fig2(args) -> int:
    rows = ex.fig2_study(args.variant, v_des=args.v, n_steps=args.steps, seed=args.seed)
    d = out_dir(args)
    meta = {"variant": args.variant, "v": args.v, "steps": args.steps, "seed": args.seed}
    if args.variant in ex.FIG2_SETUPS:
        meta.update(ex.FIG2_SETUPS[args.variant])
    table = [(int(k), float(p), float(a)) for k, p, a in rows]
    write(os.path.join(d, f"fig2_{args.variant}.csv"),
          ex.table_csv(["step_index", "predicted", "actual"], table, meta))
    print(f"mean |predicted - actual| = {ex.mean_prediction_error(rows):.5f} m/s")
    return EXIT_OK


def cmd_perturb(args) -> int:
    cfg = env_config(args)
    policy = _policy(args).as_env_policy(None)
    rows = ex.perturb_grid(policy, cfg, _floats(args.forces), _floats(args.durations), args.v,
                           args.trials, args.seed)
    d = out_dir(args)
    meta = ex.env_meta(cfg, checkpoint=args.checkpoint, forces=args.forces,
                       durations=args.durations, seed=args.seed)
    write(os.path.join(d, "perturb.csv"),
          ex.table_csv(["force", "duration", "survived", "recovered", "trials",
                        "mean_recovery_time"], rows, meta))
    for r in rows:
        print(f"F {r[0]:+6.1f} N  {r[1]:.2f} s  survived {r[2]}/{r[4]}  recovered {r[3]}/{r[4]}")
    return EXIT_OK


def cmd_slope_grid(args) -> int:
    cfg = env_config(args)
    policy = _policy(args).as_env_policy(None)
    rows = ex.slope_grid(policy, cfg, _floats(args.speeds), _floats(args.alphas), args.seed)
    d = out_dir(args)
    meta = ex.env_meta(cfg, checkpoint=args.checkpoint, speeds=args.speeds, alphas=args.alphas,
                       seed=args.seed)
    write(os.path.join(d, "slope_grid.csv"),
          ex.table_csv(["v_des", "alpha_deg", "mean_abs_error", "rmse", "fell"], rows, meta))
    for r in rows:
        print(f"v {r[0]:+.2f}  alpha {r[1]:+5.1f}  error {r[2]:.3f}  fell {r[4]}")
    return EXIT_OK


# ---------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hlbiped", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, checkpoint=False):
        sp.add_argument("--robot", default="rabbit")
        sp.add_argument("--controller", default="fl", choices=["fl", "idqp"])
        sp.add_argument("--gains", default="nominal", choices=["nominal", "high_gain"])
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        if checkpoint:
            sp.add_argument("--checkpoint", default=None,
                            help="policy file (default: the bundled policy for --robot)")

    sp = sub.add_parser("train", help="train a high-level policy with PPO")
    common(sp)
    sp.add_argument("--config", default=None, help="JSON with optional 'env' and 'ppo' sections")
    sp.add_argument("--iters", type=int, default=200)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--init", default=None, help="checkpoint to warm-start from")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a policy on a speed profile")
    common(sp, checkpoint=True)
    sp.add_argument("--profile", default=None, help="t:v pairs, e.g. 0:0,3:0.5,6:1,9:-0.5")
    sp.add_argument("--duration", type=float, default=None)
    sp.add_argument("--alpha", type=float, default=0.0, help="slope in degrees")
    sp.add_argument("--episodes", type=int, default=1)
    sp.add_argument("--log", default="basic", choices=["basic", "actions"])
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("alip-baseline", help="walk with the model-based ALIP planner")
    common(sp)
    sp.add_argument("--v", type=float, default=0.3)
    sp.add_argument("--profile", default=None)
    sp.add_argument("--duration", type=float, default=10.0)
    sp.add_argument("--noise", action="store_true", help="randomize the initial state")
    sp.set_defaults(func=cmd_alip_baseline)

    sp = sub.add_parser("fig2", help="ALIP momentum prediction vs full-order momentum")
    sp.add_argument("variant", choices=["ideal", "nonideal", "self"])
    sp.add_argument("--v", type=float, default=0.3)
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_fig2)

    sp = sub.add_parser("perturb", help="torso push survival and recovery table")
    common(sp, checkpoint=True)
    sp.add_argument("--forces", default="-40,-20,20,40")
    sp.add_argument("--durations", default="0.15")
    sp.add_argument("--v", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=10)
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("slope-grid", help="tracking error over speed and slope")
    common(sp, checkpoint=True)
    sp.add_argument("--speeds", default="-0.5,0,0.5,1.0")
    sp.add_argument("--alphas", default="-5,0,5,10")
    sp.set_defaults(func=cmd_slope_grid)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidConfig, CheckpointError, FileNotFoundError, TypeError,
            ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteLoss, FloatingPointError, RuntimeError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
