"""Actor-critic: advantage recursion, discount weighting, entropy floor."""

import numpy as np
import pytest

import dreamloop.numerics as nx
from dreamloop.agent import (ActorCritic, AgentConfig, Actor, Critic,
                             discount_weights, gae, thresholded_entropy_loss)
from dreamloop.dynamics import ImaginedBatch
from dreamloop.numerics import Tensor


def one_hot(rng, batch, k, c):
    return np.eye(c, dtype=np.float32)[rng.integers(0, c, size=(batch, k))]


class TestGae:
    def test_two_step_oracle(self):
        # hand recursion: delta_1 = 0 + 0.99*0 - 0.25 = -0.25 = A_1
        # delta_0 = 1 + 0.99*0.25 - 0.5 = 0.7475
        # A_0 = 0.7475 + 0.99*0.95*(-0.25) = 0.512375
        rewards = np.array([[1.0, 0.0]])
        values = np.array([[0.5, 0.25, 0.0]])
        discounts = np.full((1, 2), 0.99)
        adv, returns = gae(rewards, values, discounts, lam=0.95)
        np.testing.assert_allclose(adv[0], [0.512375, -0.25], rtol=1e-12)
        np.testing.assert_allclose(returns[0], [1.012375, 0.0], rtol=1e-12)

    def test_lambda_zero_is_one_step_td(self):
        rng = np.random.default_rng(0)
        rewards = rng.standard_normal((3, 5))
        values = rng.standard_normal((3, 6))
        discounts = rng.uniform(0.5, 0.99, (3, 5))
        adv, _ = gae(rewards, values, discounts, lam=0.0)
        expect = rewards + discounts * values[:, 1:] - values[:, :-1]
        np.testing.assert_allclose(adv, expect, rtol=1e-12)

    def test_lambda_one_is_discounted_return(self):
        rewards = np.array([[1.0, 2.0, 3.0]])
        values = np.zeros((1, 4))
        discounts = np.full((1, 3), 0.9)
        adv, _ = gae(rewards, values, discounts, lam=1.0)
        assert adv[0, 0] == pytest.approx(1 + 0.9 * 2 + 0.81 * 3, rel=1e-12)

    def test_zero_discount_stops_bootstrap(self):
        # a predicted terminal (g=0) cuts both the bootstrap and the carry
        rewards = np.array([[0.0, 5.0]])
        values = np.array([[0.0, 100.0, 100.0]])
        discounts = np.array([[0.0, 0.9]])
        adv, _ = gae(rewards, values, discounts, lam=0.95)
        assert adv[0, 0] == pytest.approx(0.0)

    def test_shape_contract(self):
        with pytest.raises(nx.UsageError):
            gae(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((2, 3)), 0.95)


class TestDiscountWeights:
    def test_raw_mode_is_shifted_cumprod(self):
        g = np.array([[0.9, 0.8, 0.5]])
        w = discount_weights(g, gamma=0.99, mode="raw")
        np.testing.assert_allclose(w[0], [1.0, 0.9, 0.72], rtol=1e-12)

    def test_normalized_mode_cancels_gamma(self):
        # when every predicted discount equals gamma, the weights are all 1
        g = np.full((2, 4), 0.99)
        w = discount_weights(g, gamma=0.99, mode="normalized")
        np.testing.assert_allclose(w, 1.0, rtol=1e-12)

    def test_first_weight_always_one(self):
        rng = np.random.default_rng(1)
        g = rng.uniform(0.1, 0.99, (4, 6))
        for mode in ("raw", "normalized"):
            np.testing.assert_array_equal(
                discount_weights(g, 0.99, mode)[:, 0], 1.0)


class TestEntropyFloor:
    def test_inactive_above_threshold(self):
        # normalized entropy 0.5 over a 0.1 floor -> no push
        h = Tensor(np.array(0.5 * np.log(3)))
        out = thresholded_entropy_loss(h, threshold=0.1, action_count=3)
        assert out.data == 0.0

    def test_active_below_threshold(self):
        h = Tensor(np.array(0.05 * np.log(3)))
        out = thresholded_entropy_loss(h, threshold=0.1, action_count=3)
        assert out.data == pytest.approx(0.05, rel=1e-6)

    def test_gradient_pushes_entropy_up_only_when_low(self):
        low = Tensor(np.array(0.01), requires_grad=True)
        out = thresholded_entropy_loss(low, 0.1, 3)
        nx.backward(out)
        assert low.grad < 0  # loss falls as entropy rises

        high = Tensor(np.array(1.0), requires_grad=True)
        out2 = thresholded_entropy_loss(high, 0.1, 3)
        nx.backward(out2)
        assert high.grad == 0.0

    def test_rejects_degenerate_action_space(self):
        with pytest.raises(nx.UsageError):
            thresholded_entropy_loss(Tensor(np.array(0.0)), 0.1, 1)


class TestConfig:
    def test_input_dim_grows_with_summary(self):
        z_only = AgentConfig(latent_vars=4, latent_classes=4, d_model=32)
        both = AgentConfig(latent_vars=4, latent_classes=4, d_model=32,
                           policy_input="z_and_h")
        assert z_only.actor_input_dim == 16
        assert both.actor_input_dim == 48

    def test_validation(self):
        with pytest.raises(ValueError):
            AgentConfig(action_count=1)
        with pytest.raises(ValueError):
            AgentConfig(policy_input="pixels")
        with pytest.raises(ValueError):
            AgentConfig(discount_weight_mode="sometimes")


def small_cfg(**over):
    base = dict(action_count=3, latent_vars=4, latent_classes=4,
                actor_units=(2, 32), critic_units=(2, 32), d_model=16)
    base.update(over)
    return AgentConfig(**base)


class TestActor:
    def test_distribution_over_actions(self):
        actor = Actor(small_cfg(), np.random.default_rng(0))
        z = one_hot(np.random.default_rng(1), 5, 4, 4)
        dist = actor.dist(z)
        probs = dist.probs().data
        assert probs.shape == (5, 3)
        np.testing.assert_allclose(probs.sum(-1), 1.0, rtol=1e-5)

    def test_act_seeded(self):
        actor = Actor(small_cfg(), np.random.default_rng(0))
        z = one_hot(np.random.default_rng(1), 64, 4, 4)
        a1 = actor.act(z, np.random.default_rng(3))
        a2 = actor.act(z, np.random.default_rng(3))
        np.testing.assert_array_equal(a1, a2)
        assert a1.shape == (64,) and set(np.unique(a1)) <= {0, 1, 2}

    def test_summary_input_changes_policy(self):
        cfg = small_cfg(policy_input="z_and_h")
        actor = Actor(cfg, np.random.default_rng(0))
        z = one_hot(np.random.default_rng(1), 4, 4, 4)
        h0 = np.zeros((4, 16), np.float32)
        h1 = np.ones((4, 16), np.float32)
        p0 = actor.dist(z, h0).probs().data
        p1 = actor.dist(z, h1).probs().data
        assert np.max(np.abs(p0 - p1)) > 1e-6


class TestCritic:
    def test_scalar_value_per_state(self):
        critic = Critic(small_cfg(), np.random.default_rng(0))
        z = one_hot(np.random.default_rng(1), 7, 4, 4)
        v = critic.value(z)
        assert v.data.shape == (7,)


def dreamed_batch(cfg, m=6, horizon=5, seed=0):
    rng = np.random.default_rng(seed)
    k, c = cfg.latent_vars, cfg.latent_classes
    lat = np.eye(c, dtype=np.float32)[
        rng.integers(0, c, size=(m, horizon + 1, k))]
    return ImaginedBatch(
        latents=lat,
        actions=rng.integers(0, cfg.action_count, size=(m, horizon)),
        rewards=rng.standard_normal((m, horizon)).astype(np.float32),
        discounts=rng.uniform(0.5, 0.99, (m, horizon)).astype(np.float32),
        hidden_prev=rng.standard_normal((m, horizon, cfg.d_model)).astype(np.float32),
    )


class TestActorCritic:
    def test_losses_and_stats(self):
        cfg = small_cfg()
        ac = ActorCritic(cfg, np.random.default_rng(0))
        batch = dreamed_batch(cfg)
        actor_loss, critic_loss, stats = ac.losses(
            batch, gamma=0.99, lam=0.95, eta=0.01, entropy_threshold=0.1)
        for key in ("actor_loss", "critic_loss", "policy_entropy",
                    "policy_entropy_norm", "mean_value", "mean_advantage",
                    "mean_imagined_reward"):
            assert key in stats
        assert np.isfinite(actor_loss.data) and np.isfinite(critic_loss.data)
        assert 0.0 <= stats["policy_entropy_norm"] <= 1.0 + 1e-6

    def test_gradients_stay_in_their_networks(self):
        cfg = small_cfg()
        ac = ActorCritic(cfg, np.random.default_rng(0))
        batch = dreamed_batch(cfg)
        actor_loss, critic_loss, _ = ac.losses(
            batch, gamma=0.99, lam=0.95, eta=0.01, entropy_threshold=0.1)

        ac.actor.params.zero_grad()
        ac.critic.params.zero_grad()
        nx.backward(actor_loss)
        assert any(np.any(p.grad) for _, p in ac.actor.params.items()
                   if p.grad is not None)
        assert all(p.grad is None or not np.any(p.grad)
                   for _, p in ac.critic.params.items())

        ac.actor.params.zero_grad()
        nx.backward(critic_loss)
        assert any(np.any(p.grad) for _, p in ac.critic.params.items()
                   if p.grad is not None)
        assert all(p.grad is None or not np.any(p.grad)
                   for _, p in ac.actor.params.items())

    def test_policy_improves_on_rigged_rewards(self):
        # bandit-style check: reward 1 only for action 0 -> after a few
        # hundred updates the policy concentrates on action 0
        cfg = small_cfg()
        ac = ActorCritic(cfg, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        m, horizon = 16, 3
        k, c = cfg.latent_vars, cfg.latent_classes
        lat = np.broadcast_to(np.eye(c, dtype=np.float32)[
            rng.integers(0, c, size=(1, 1, k))], (m, horizon + 1, k, c)).copy()

        probs_of_zero = []
        for step in range(300):
            z_flat = lat[:, :-1].reshape(m * horizon, k, c)
            acts = ac.actor.act(z_flat, np.random.default_rng(step)
                                ).reshape(m, horizon)
            batch = ImaginedBatch(
                latents=lat, actions=acts,
                rewards=(acts == 0).astype(np.float32),
                discounts=np.full((m, horizon), 0.99, np.float32),
                hidden_prev=np.zeros((m, horizon, cfg.d_model), np.float32),
            )
            actor_loss, critic_loss, _ = ac.losses(
                batch, gamma=0.99, lam=0.95, eta=0.01, entropy_threshold=0.02)
            ac.actor.params.zero_grad()
            ac.critic.params.zero_grad()
            nx.backward(actor_loss)
            nx.backward(critic_loss)
            nx.adam_step(ac.actor.params, lr=3e-3)
            nx.adam_step(ac.critic.params, lr=3e-3)
            if step >= 290:
                probs_of_zero.append(
                    ac.actor.dist(lat[:, 0]).probs().data[:, 0].mean())
        assert np.mean(probs_of_zero) > 0.8
