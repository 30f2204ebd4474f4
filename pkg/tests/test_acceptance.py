"""Acceptance gate: ten end-to-end checks, one PASS/FAIL line each.

Each test measures its own wall-clock budget where one applies. The two
desk-scale training checks (9 and 10) train six small agents on first run
and cache the summaries under .desk_cache/; later runs reuse the cache.
"""

import time

import numpy as np
import pytest

import dreamloop.numerics as nx
from dreamloop.numerics import (CategoricalVector, ParameterSet, Tensor,
                                adam_step)
from dreamloop.numerics.gradcheck import check_gradients
from dreamloop.analysis import (BenchSettings, aggregates,
                                bundled_method_table, bundled_stage_table,
                                compare_bench)
from dreamloop.agent import (ActorCritic, AgentConfig, discount_weights, gae,
                             thresholded_entropy_loss)
from dreamloop.dynamics import DynamicsConfig, DynamicsModel
from dreamloop.kl_identity import run_trials
from dreamloop.observation import ObsModelConfig, ObservationModel
from dreamloop.replay import ExperienceDataset, simulate_balanced_growth

from desk_harness import (SEEDS, desk_random_baseline, desk_variant,
                          run_desk)


def report(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num}: {detail}"


# -- 1 & 2: published-score aggregation ---------------------------------------------


def test_criterion_1_method_aggregates():
    t0 = time.time()
    twm = aggregates(bundled_method_table("TWM"), bootstrap_resamples=1000,
                     seed=0)
    spr = aggregates(bundled_method_table("SPR"), bootstrap_resamples=1000,
                     seed=0)
    elapsed = time.time() - t0
    checks = [
        abs(twm.normalized_mean - 0.956) <= 1e-3,
        abs(twm.normalized_median - 0.505) <= 1e-3,
        abs(spr.normalized_mean - 0.616) <= 1e-3,
        abs(spr.normalized_median - 0.396) <= 1e-3,
        elapsed < 1.0,
    ]
    report(1, all(checks),
           f"TWM mean/median {twm.normalized_mean:.4f}/{twm.normalized_median:.4f} "
           f"(targets 0.956/0.505), SPR {spr.normalized_mean:.4f}/"
           f"{spr.normalized_median:.4f} (targets 0.616/0.396), "
           f"{elapsed:.2f}s (limit 1s)")


def test_criterion_2_stage_aggregates():
    t0 = time.time()
    at50 = aggregates(bundled_stage_table(50_000), bootstrap_resamples=1000,
                      seed=0)
    at100 = aggregates(bundled_stage_table(100_000), bootstrap_resamples=1000,
                       seed=0)
    elapsed = time.time() - t0
    ok = (abs(at50.normalized_mean - 0.624) <= 1e-3
          and abs(at100.normalized_mean - 0.956) <= 1e-3)
    report(2, ok,
           f"normalized mean {at50.normalized_mean:.4f} at 50K and "
           f"{at100.normalized_mean:.4f} at 100K (targets 0.624/0.956), "
           f"{elapsed:.2f}s")


# -- 3: gradient identity between the two regularizer forms --------------------------


def test_criterion_3_kl_ce_identity():
    t0 = time.time()
    rep = run_trials(n_trials=100, seed=0, tolerance=1e-6)
    elapsed = time.time() - t0
    ok = rep.passed and rep.trials >= 100 and elapsed < 30.0
    report(3, ok,
           f"{rep.trials} trials, max relative gradient error "
           f"{rep.max_rel_error:.2e} (tolerance 1e-6), {elapsed:.1f}s "
           f"(limit 30s)")


# -- 4: every training loss against central finite differences -----------------------


def _fd_observation_loss(seed: int) -> float:
    rng = np.random.default_rng(seed)
    cfg = ObsModelConfig((8, 8, 1), latent_vars=2, latent_classes=3,
                         base_width=2)
    model = ObservationModel(cfg, rng)
    obs = rng.random((2, 8, 8, 1))
    prior_logits = rng.standard_normal((2, 2, 3))

    def loss_fn():
        z, posterior = model.encode(obs, np.random.default_rng(0), "mode")
        decoded = model.decode(z)
        prior = CategoricalVector(Tensor(prior_logits.copy()),
                                  mix=cfg.probs_mix)
        total, _ = model.loss(obs, posterior, decoded, alpha1=0.7, alpha2=0.3,
                              posterior_with_prior=posterior, prior=prior)
        return total

    subset = [(n, model.params[n]) for n in
              ("enc.conv0.w", "enc.out.b", "dec.conv0.b")]
    return check_gradients(loss_fn, subset, h=1e-5)


def _fd_dynamics_loss(seed: int) -> float:
    rng = np.random.default_rng(seed)
    cfg = DynamicsConfig(layers=1, d_model=8, heads=2, d_ff=16, seq_len=3,
                         action_count=2, latent_vars=2, latent_classes=3,
                         latent_head=(1, 8), reward_head=(1, 8),
                         discount_head=(1, 8))
    model = DynamicsModel(cfg, rng)
    z = np.eye(3)[rng.integers(0, 3, size=(2, 3, 2))]
    post_logits = rng.standard_normal((2, 3, 2, 3))
    actions = rng.integers(0, 2, size=(2, 3))
    rewards = rng.standard_normal((2, 3))
    dones = np.zeros((2, 3))
    dones[0, 2] = 1.0

    def loss_fn():
        post = CategoricalVector(Tensor(post_logits.copy()), mix=cfg.probs_mix)
        total, _, _ = model.loss(Tensor(z.copy()), post, actions, rewards,
                                 dones, beta1=1.3, beta2=0.8)
        return total

    subset = [(n, model.params[n]) for n in
              ("layer0.attn.q.w", "layer0.ff.0.b", "head.reward.0.w",
               "head.discount.0.b", "head.latent.0.w", "embed.a")]
    return check_gradients(loss_fn, subset, h=1e-5)


def _actor_critic_fixture(seed: int):
    rng = np.random.default_rng(seed)
    cfg = AgentConfig(action_count=3, latent_vars=2, latent_classes=3,
                      actor_units=(1, 8), critic_units=(1, 8), d_model=4)
    ac = ActorCritic(cfg, rng)
    m, horizon = 3, 4
    lat = np.eye(3)[rng.integers(0, 3, size=(m, horizon + 1, 2))]
    actions = rng.integers(0, 3, size=(m, horizon))
    rewards = rng.standard_normal((m, horizon))
    discounts = rng.uniform(0.6, 0.99, (m, horizon))
    # targets (advantages, lambda-returns, weights) are stop-gradients in
    # the training step, so they are computed once and held fixed here
    values = ac.critic.value(lat.reshape(-1, 2, 3)).data.reshape(m, horizon + 1)
    adv, returns = gae(rewards, values, discounts, lam=0.95)
    w = discount_weights(discounts, gamma=0.99)
    return ac, lat, actions, adv, returns, w, (m, horizon)


def _fd_actor_loss(seed: int) -> float:
    ac, lat, actions, adv, _, w, (m, horizon) = _actor_critic_fixture(seed)

    def loss_fn():
        dist = ac.actor.dist(lat[:, :-1].reshape(m * horizon, 2, 3))
        logp = dist.log_prob_of(actions.reshape(-1))
        return -nx.tmean(Tensor(w.reshape(-1)) * logp * Tensor(adv.reshape(-1)))

    return check_gradients(loss_fn, list(ac.actor.params.items()), h=1e-5)


def _fd_critic_loss(seed: int) -> float:
    ac, lat, _, _, returns, w, (m, horizon) = _actor_critic_fixture(seed)

    def loss_fn():
        v = ac.critic.value(lat[:, :-1].reshape(m * horizon, 2, 3))
        err = v - Tensor(returns.reshape(-1))
        return nx.tmean(Tensor(w.reshape(-1)) * 0.5 * err * err)

    return check_gradients(loss_fn, list(ac.critic.params.items()), h=1e-5)


def _fd_entropy_loss(seed: int) -> float:
    ac, lat, _, _, _, _, (m, horizon) = _actor_critic_fixture(seed)

    def loss_fn():
        dist = ac.actor.dist(lat[:, :-1].reshape(m * horizon, 2, 3))
        # threshold above the uniform bound so the hinge is active and the
        # gradient genuinely flows through the entropy term
        return thresholded_entropy_loss(nx.tmean(dist.entropy()), 0.99, 3)

    return check_gradients(loss_fn, list(ac.actor.params.items()), h=1e-5)


def test_criterion_4_finite_difference_suite():
    t0 = time.time()
    losses = {
        "observation": _fd_observation_loss,
        "dynamics": _fd_dynamics_loss,
        "actor": _fd_actor_loss,
        "critic": _fd_critic_loss,
        "thresholded-entropy": _fd_entropy_loss,
    }
    n_seeds = 20
    worst = {}
    with nx.verification_mode():
        for name, fn in losses.items():
            worst[name] = max(fn(seed) for seed in range(n_seeds))
    elapsed = time.time() - t0
    overall = max(worst.values())
    ok = overall < 1e-4 and elapsed < 300.0
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    report(4, ok, f"max relative error per loss over {n_seeds} seeds: "
                  f"{detail} (limit 1e-4), {elapsed:.0f}s (limit 5min)")


# -- 5: incremental decoding equals full recomputation; strict causality -------------


def _default_dims_model(horizon: int, seed: int = 0) -> DynamicsModel:
    cfg = DynamicsConfig(layers=10, d_model=256, heads=4, d_ff=1024,
                         seq_len=16, mem_len=3 * horizon - 1, action_count=6)
    return DynamicsModel(cfg, np.random.default_rng(seed))


def _record_rollout(model: DynamicsModel, batch: int, horizon: int, seed: int):
    cfg = model.cfg
    rng = np.random.default_rng(seed)
    z0 = np.eye(cfg.latent_classes, dtype=np.float32)[
        rng.integers(0, cfg.latent_classes, size=(batch, cfg.latent_vars))]
    policy = lambda z, h: rng.integers(0, cfg.action_count, size=z.shape[0])
    return model.imagine(z0, policy, horizon, np.random.default_rng(seed + 1))


def test_criterion_5_cache_equivalence_and_causality():
    t0 = time.time()
    horizon = 64
    model = _default_dims_model(horizon)
    batch = _record_rollout(model, batch=2, horizon=horizon, seed=3)
    cached = model.replay_hidden_cached(batch)
    vanilla = model.replay_hidden_vanilla(batch)
    max_dh = float(np.max(np.abs(cached - vanilla)))

    cut = horizon // 2
    tampered = _record_rollout(model, batch=2, horizon=horizon, seed=3)
    rng = np.random.default_rng(9)
    tampered.latents[:, cut + 1:] = np.eye(model.cfg.latent_classes,
                                           dtype=np.float32)[
        rng.integers(0, model.cfg.latent_classes,
                     size=(2, horizon - cut, model.cfg.latent_vars))]
    tampered.rewards[:, cut:] += 5.0
    tampered.actions[:, cut + 1:] = (tampered.actions[:, cut + 1:] + 1) % 6
    past_delta = float(np.max(np.abs(
        model.replay_hidden_vanilla(tampered)[:, :cut + 1]
        - vanilla[:, :cut + 1])))
    elapsed = time.time() - t0
    ok = max_dh < 1e-5 and past_delta == 0.0 and elapsed < 60.0
    report(5, ok,
           f"max |dh| cached-vs-full {max_dh:.2e} over {horizon} steps "
           f"(limit 1e-5); past-state change under future perturbation "
           f"{past_delta} (must be exactly 0); {elapsed:.0f}s (limit 1min)")


# -- 6: cached imagination throughput ------------------------------------------------


def test_criterion_6_throughput():
    t0 = time.time()
    comp = compare_bench(BenchSettings())  # default dims, l=16, H=15
    elapsed = time.time() - t0
    ok = comp.speed_ratio >= 1.5 and elapsed < 300.0
    report(6, ok,
           f"cached {comp.cached.samples_per_sec:.0f} samples/s vs vanilla "
           f"{comp.vanilla.samples_per_sec:.0f} -> ratio "
           f"{comp.speed_ratio:.2f}x (needs >= 1.5x), max |dh| "
           f"{comp.max_abs_diff:.2e}, {elapsed:.0f}s (limit 5min)")


# -- 7: dataset-sampling laws ---------------------------------------------------------


def test_criterion_7_sampler_laws():
    t0 = time.time()
    # (a) infinite temperature collapses to exact uniform
    ds = ExperienceDataset((1, 1, 1), capacity=64)
    blank = np.zeros((1, 1, 1), np.uint8)
    rng = np.random.default_rng(0)
    for _ in range(64):
        ds.append(blank, 0, 0.0, False)
    for _ in range(50):
        ds.sample_sequences(4, 8, 20.0, rng)   # skew the counts
    p_inf = ds.start_probabilities(8, np.inf)
    p_uni = ds.start_probabilities(8, None)
    tv = 0.5 * float(np.abs(p_inf - p_uni).sum())

    # (b) fewer selections -> strictly higher probability
    p20 = ds.start_probabilities(8, 20.0)
    counts = ds.counts[:p20.size]
    order = np.argsort(counts, kind="stable")
    monotone = True
    for a, b in zip(order[:-1], order[1:]):
        if counts[a] < counts[b] and not p20[a] > p20[b]:
            monotone = False
    # (c) linearly growing dataset: balanced sampling spreads half the
    # lifetime selection mass over the first half of the final dataset.
    # The equalization band is O(tau) wide, so the mean visitation count
    # must sit far above tau for the law to be visible.
    grow = simulate_balanced_growth(total=5000, tau=20.0, seq_len=1,
                                    draws_per_append=10, batch=100,
                                    rng=np.random.default_rng(1))
    first_half_mass = float(grow.cumulative_selection_mass()[2500 - 1])
    elapsed = time.time() - t0
    ok = (tv < 1e-6 and monotone and abs(first_half_mass - 0.50) <= 0.05
          and elapsed < 60.0)
    report(7, ok,
           f"TV(inf-temperature, uniform) {tv:.1e} (limit 1e-6); "
           f"count->probability ordering {'holds' if monotone else 'BROKEN'}; "
           f"first-half selection mass {first_half_mass:.3f} "
           f"(target 0.50 +/- 0.05); {elapsed:.0f}s (limit 1min)")


# -- 8: token arithmetic ---------------------------------------------------------------


def test_criterion_8_token_arithmetic():
    results = []
    for steps in (1, 4, 16):
        for ablation, expected in ((False, 3 * steps - 1), (True, 2 * steps)):
            cfg = DynamicsConfig(layers=1, d_model=8, heads=2, d_ff=16,
                                 seq_len=max(steps, 2), action_count=3,
                                 latent_vars=2, latent_classes=3,
                                 latent_head=(1, 8), reward_head=(1, 8),
                                 discount_head=(1, 8),
                                 no_reward_tokens=ablation)
            model = DynamicsModel(cfg, np.random.default_rng(0))
            rng = np.random.default_rng(1)
            z = np.eye(3)[rng.integers(0, 3, size=(1, steps, 2))]
            a = rng.integers(0, 3, size=(1, steps))
            r = (None if ablation
                 else rng.standard_normal((1, steps - 1)).astype(np.float32))
            tokens, _ = model.build_tokens(z.astype(np.float32), a, r)
            results.append((steps, ablation, tokens.shape[1], expected))
    ok = all(actual == expected for _, _, actual, expected in results)
    detail = "; ".join(
        f"l={s}{' ablated' if ab else ''}: {act} (want {exp})"
        for s, ab, act, exp in results)
    report(8, ok, detail)


# -- 9 & 10: desk-scale end-to-end learning and ablation directions -------------------


@pytest.fixture(scope="module")
def desk_results():
    runs = {}
    for uniform in (False, True):
        for seed in SEEDS:
            runs[(seed, uniform)] = run_desk(desk_variant(seed, uniform))
    return runs


def test_criterion_9_desk_learning(desk_results):
    random_mean = desk_random_baseline()
    per_seed = []
    for seed in SEEDS:
        r = desk_results[(seed, False)]
        gain = r["final_episode_mean"] - random_mean
        ce_drop = 1.0 - r["ce_trained"] / r["ce_untrained"]
        in_time = r["wall_sec"] <= 45 * 60
        per_seed.append((seed, gain >= 1.0 and ce_drop >= 0.30 and in_time,
                         gain, ce_drop, r["wall_sec"]))
    passed = sum(ok for _, ok, *_ in per_seed)
    detail = "; ".join(
        f"seed {s}: gain {g:+.2f} (needs >= +1.0), latent-CE drop {d:.0%} "
        f"(needs >= 30%), {w / 60:.0f}min" for s, _, g, d, w in per_seed)
    report(9, passed >= 2,
           f"{passed}/3 seeds pass vs random baseline {random_mean:.2f} — {detail}")


def test_criterion_10_ablation_directions(desk_results):
    sampling_wins, entropy_holds = [], []
    for seed in SEEDS:
        balanced = desk_results[(seed, False)]
        uniform = desk_results[(seed, True)]
        sampling_wins.append(
            balanced["dyn_loss_final"] <= uniform["dyn_loss_final"])
        entropy_holds.append(balanced["entropy_second_half_min"] > 0.02)
    ok = sum(sampling_wins) >= 2 and sum(entropy_holds) >= 2
    detail = (
        "balanced-vs-uniform final dynamics loss: "
        + "; ".join(
            f"seed {s}: {desk_results[(s, False)]['dyn_loss_final']:.3f} vs "
            f"{desk_results[(s, True)]['dyn_loss_final']:.3f}"
            f" ({'<=' if w else '>'})"
            for s, w in zip(SEEDS, sampling_wins))
        + " | second-half entropy floor: "
        + "; ".join(
            f"seed {s}: {desk_results[(s, False)]['entropy_second_half_min']:.3f}"
            f" ({'>' if h else '<='} 0.02)"
            for s, h in zip(SEEDS, entropy_holds)))
    report(10, ok, detail)
