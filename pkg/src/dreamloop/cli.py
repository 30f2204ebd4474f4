"""Command-line entry points: training, evaluation, score aggregation,
attention maps, imagined-trajectory dumps, the throughput benchmark, the
KL/CE gradient-identity check, and config-file generation."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _cmd_train(args) -> int:
    from .orchestrator import Trainer, apply_overrides, load_config, save_config
    cfg = load_config(args.config)
    if args.set:
        cfg = apply_overrides(cfg, args.set)
    trainer = Trainer(cfg, out_dir=args.out, verbose=True)
    save_config(cfg, os.path.join(args.out, "config.cfg"))
    trainer.train()
    if cfg.eval_episodes > 0:
        mean, scores = trainer.evaluate(
            out_path=os.path.join(args.out, "eval.csv"))
        print(f"evaluation over {len(scores)} episodes: mean score {mean:.3f}")
    print(f"artifacts written to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .orchestrator import evaluate_policy, load_inference_policy
    cfg, runtime = load_inference_policy(args.ckpt)
    mean, scores = evaluate_policy(cfg, runtime, episodes=args.episodes,
                                   seed=args.seed, out_path=args.out)
    print(f"{len(scores)} episodes on {cfg.env_id}: mean score {mean:.3f} "
          f"(min {min(scores):.3f}, max {max(scores):.3f})")
    return 0


def _cmd_metrics(args) -> int:
    from .analysis import aggregates, fraction_above_csv, score_table_from_files
    table = score_table_from_files(args.scores, args.refs)
    report = aggregates(table, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(report.to_csv())
    if args.curve_out:
        with open(args.curve_out, "w", encoding="utf-8") as f:
            f.write(fraction_above_csv(table, np.linspace(0.0, 2.0, 41)))
    print(f"normalized mean {report.normalized_mean:.3f}, "
          f"median {report.normalized_median:.3f}, "
          f"IQM {report.iqm:.3f}, "
          f"optimality gap {report.optimality_gap:.3f} -> {args.out}")
    return 0


def _collect_live_window(cfg, obs_model, dyn_model, agent, steps: int,
                         seed: int):
    """Roll the trained policy in its environment for one window."""
    from .envs import make_env
    from .orchestrator import PolicyRuntime
    runtime = PolicyRuntime(cfg, obs_model, agent.actor,
                            dyn_model if cfg.policy_input == "z_and_h" else None)
    env = make_env(cfg.env_id, cfg.frame_size, cfg.frame_skip, cfg.frame_stack)
    rng_latent = np.random.default_rng([seed, 11])
    rng_policy = np.random.default_rng([seed, 12])
    obs = env.reset(seed=seed)
    runtime.reset()
    observations, actions, rewards = [], [], []
    for _ in range(steps):
        action = runtime.act(obs, rng_latent, rng_policy)
        result = env.step(action)
        observations.append(obs)
        actions.append(action)
        rewards.append(result.reward)
        runtime.observe(action, result.reward)
        if result.done:
            break
        obs = result.observation
    return (np.asarray(observations, dtype=np.float32),
            np.asarray(actions, dtype=np.int64)[None],
            np.asarray(rewards, dtype=np.float32)[None])


def _cmd_attn(args) -> int:
    from .analysis import rollout_from_model, write_rollout
    from .numerics import tensor as nx
    from .orchestrator import load_trained_models
    cfg, obs_model, dyn_model, agent = load_trained_models(args.ckpt)
    steps = cfg.sequence_length
    if args.traj == "live":
        obs_seq, actions, rewards = _collect_live_window(
            cfg, obs_model, dyn_model, agent, steps, args.seed)
    else:
        from .replay import ExperienceDataset
        data = ExperienceDataset.load(args.traj)
        batch = data.sample_sequences(1, steps, tau=None,
                                      rng=np.random.default_rng(args.seed))
        obs_seq = batch.observations[0]
        actions, rewards = batch.actions, batch.rewards
    if obs_seq.shape[0] < 2:
        print("episode ended immediately; nothing to visualize", file=sys.stderr)
        return 1
    with nx.no_grad():
        z, _ = obs_model.encode(obs_seq, np.random.default_rng(0),
                                sample_mode="mode")
    window = z.data.shape[0]
    latents = z.data[None]
    result = rollout_from_model(dyn_model, latents,
                                actions[:, :window], rewards[:, :window])
    files = write_rollout(result, args.out)
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def _cmd_imagine(args) -> int:
    from .analysis import dump_trajectory
    from .envs import make_env
    from .orchestrator import load_trained_models
    cfg, obs_model, dyn_model, agent = load_trained_models(args.ckpt)
    env_id = args.env or cfg.env_id
    env = make_env(env_id, cfg.frame_size, cfg.frame_skip, cfg.frame_stack)
    obs = env.reset(seed=args.seed)
    rng_policy = np.random.default_rng([args.seed, 21])
    with_h = cfg.policy_input == "z_and_h"

    def policy(z, h_prev):
        return agent.actor.act(z, rng_policy, h_prev if with_h else None)

    files = dump_trajectory(obs_model, dyn_model, obs, steps=args.steps,
                            out_dir=args.out, policy=policy,
                            samples=args.samples, seed=args.seed)
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    from .analysis import BenchSettings, compare_bench, throughput_bench
    settings = BenchSettings(batch=args.batch, horizon=args.horizon)
    if args.mode == "both":
        comparison = compare_bench(settings)
        text = comparison.to_csv()
        print(f"cached {comparison.cached.samples_per_sec:.0f} samples/s, "
              f"vanilla {comparison.vanilla.samples_per_sec:.0f} samples/s, "
              f"ratio {comparison.speed_ratio:.2f}, "
              f"max |dh| {comparison.max_abs_diff:.2e}")
    else:
        result = throughput_bench(args.mode, settings)
        text = ("mode,batch,horizon,elapsed_sec,samples_per_sec,"
                "tokens_processed\n" + result.csv_row() + "\n")
        print(f"{args.mode}: {result.samples_per_sec:.0f} samples/s")
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(text)
    return 0


def _cmd_verify_kl(args) -> int:
    from .kl_identity import run_trials
    report = run_trials(n_trials=args.trials, seed=args.seed)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: max relative error {report.max_rel_error:.3e} over "
          f"{report.trials} trials (tolerance {report.tolerance:.0e})")
    return 0 if report.passed else 1


def _cmd_write_config(args) -> int:
    from .orchestrator import default_config, desk_config, save_config
    cfg = desk_config() if args.preset == "desk" else default_config()
    save_config(cfg, args.out)
    print(f"wrote {args.preset} config to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dreamloop",
        description="Train and inspect a transformer world-model agent.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the full training loop")
    p.add_argument("--config", required=True, help="key-value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field (repeatable)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional per-episode CSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("metrics", help="aggregate normalized scores")
    p.add_argument("--scores", required=True, help="CSV: game,run,score")
    p.add_argument("--refs", required=True, help="CSV: game,random,human")
    p.add_argument("--out", required=True)
    p.add_argument("--curve-out", default=None,
                   help="optional fraction-above-threshold CSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("attn", help="attention rollout maps for one window")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--traj", required=True,
                   help="recorded experience file, or 'live'")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_attn)

    p = sub.add_parser("imagine", help="dump imagined trajectories as images")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--env", default=None, help="defaults to the training env")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_imagine)

    p = sub.add_parser("bench", help="cached vs full-prefix replay throughput")
    p.add_argument("--mode", choices=["cached", "vanilla", "both"],
                   default="both")
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--horizon", type=int, default=15)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify-kl",
                       help="KL/CE gradient-identity spot check")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify_kl)

    p = sub.add_parser("write-config", help="emit a config file to edit")
    p.add_argument("--preset", choices=["default", "desk"], default="default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_write_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
