"""Score aggregation, attention maps, frame dumps, and the replay benchmark."""

import csv
import os

import numpy as np
import pytest

from dreamloop.analysis import (AttentionRollout, BenchSettings,
                                EmptyTableError, NormalizationError,
                                ScoreTable, aggregates, attention_rollout,
                                bundled_method_table, bundled_references,
                                bundled_stage_table, compare_bench,
                                composite_stack, dump_trajectory,
                                fraction_above, frame_strip,
                                interquartile_mean, normalized_score,
                                optimality_gap, rollout_from_model,
                                stack_tints, throughput_bench, token_counts,
                                token_labels, write_rollout)
from dreamloop.observation import ObsModelConfig, ObservationModel
from dreamloop.dynamics import DynamicsConfig, DynamicsModel


class TestScores:
    def test_normalized_score_linear_map(self):
        assert normalized_score(15.0, random=10.0, human=20.0) == pytest.approx(0.5)
        assert normalized_score(10.0, 10.0, 20.0) == 0.0
        assert normalized_score(25.0, 10.0, 20.0) == pytest.approx(1.5)
        # inverted scales (lower is better for the human column) still work
        assert normalized_score(-5.0, 0.0, -10.0) == pytest.approx(0.5)

    def test_equal_references_rejected(self):
        with pytest.raises(NormalizationError):
            normalized_score(1.0, 3.0, 3.0)

    def test_iqm_trims_quarter_each_side(self):
        assert interquartile_mean([0.0, 1.0, 2.0, 3.0]) == pytest.approx(1.5)
        # an outlier in the trimmed quarter cannot move the result
        assert interquartile_mean([0.0, 1.0, 2.0, 300.0]) == pytest.approx(1.5)
        assert interquartile_mean([5.0]) == pytest.approx(5.0)

    def test_iqm_empty(self):
        with pytest.raises(EmptyTableError):
            interquartile_mean([])

    def test_optimality_gap_clamps_at_reference(self):
        assert optimality_gap([0.5, 1.5]) == pytest.approx(0.25)
        assert optimality_gap([2.0, 3.0]) == 0.0

    def test_fraction_above_is_strict(self):
        refs = {"g": (0.0, 1.0)}
        table = ScoreTable(
            [("g", 0, 0.5), ("g", 1, 1.0), ("g", 2, 1.5)], refs)
        out = dict(fraction_above(table, [0.0, 1.0, 2.0]))
        assert out[1.0] == pytest.approx(1 / 3)   # strictly above
        assert out[0.0] == pytest.approx(1.0)
        assert out[2.0] == 0.0

    def test_table_validation(self):
        refs = {"pong": (-20.0, 15.0)}
        table = ScoreTable([("pong", 0, 10.0), ("pong", 1, -5.0)], refs)
        assert table.games() == ["pong"]
        with pytest.raises(KeyError):
            ScoreTable([("breakout", 0, 10.0)], refs)  # no reference row
        with pytest.raises(NormalizationError):
            ScoreTable([("pong", 0, 1.0)], {"pong": (2.0, 2.0)})

    def test_aggregates_on_known_table(self):
        refs = {"a": (0.0, 1.0), "b": (0.0, 1.0)}
        table = ScoreTable(
            [("a", 0, 0.2), ("a", 1, 0.4), ("b", 0, 0.8), ("b", 1, 1.0)], refs)
        rep = aggregates(table, bootstrap_resamples=200, seed=0)
        assert rep.per_game_mean["a"] == pytest.approx(0.3)
        assert rep.per_game_mean["b"] == pytest.approx(0.9)
        assert rep.normalized_mean == pytest.approx(0.6)
        assert rep.normalized_median == pytest.approx(0.6)
        assert rep.optimality_gap == pytest.approx((0.8 + 0.6 + 0.2 + 0.0) / 4)
        lo, hi = rep.confidence["normalized_mean"]
        assert lo <= rep.normalized_mean <= hi

    def test_bundled_tables_are_consistent(self):
        refs = bundled_references()
        table = bundled_method_table("TWM")
        assert set(table.games()) <= set(refs)
        rep = aggregates(table, bootstrap_resamples=50, seed=0)
        assert rep.normalized_mean == pytest.approx(0.956, abs=1e-3)
        assert rep.normalized_median == pytest.approx(0.505, abs=1e-3)
        staged = bundled_stage_table(50_000)
        rep50 = aggregates(staged, bootstrap_resamples=50, seed=0)
        assert rep50.normalized_mean == pytest.approx(0.624, abs=1e-3)

    def test_unknown_bundled_method(self):
        with pytest.raises(KeyError):
            bundled_method_table("NOPE")


class TestAttentionRollout:
    def test_single_uniform_layer(self):
        # causal uniform attention over 3 tokens; residual mixing halves it
        a = np.array([[1.0, 0.0, 0.0],
                      [0.5, 0.5, 0.0],
                      [1 / 3, 1 / 3, 1 / 3]])
        result = attention_rollout([a])
        expect = 0.5 * (a + np.eye(3))
        np.testing.assert_allclose(result.rollout, expect, atol=1e-12)
        np.testing.assert_allclose(result.rollout.sum(-1), 1.0, atol=1e-12)

    def test_two_layers_compose_by_matmul(self):
        rng = np.random.default_rng(0)
        layers = []
        for _ in range(2):
            raw = rng.uniform(0.1, 1.0, (4, 4))
            raw = np.tril(raw)
            layers.append(raw / raw.sum(-1, keepdims=True))
        result = attention_rollout(layers)
        mats = []
        for a in layers:
            aug = np.tril(a + np.eye(4))
            mats.append(aug / aug.sum(-1, keepdims=True))
        expect = mats[1] @ mats[0]
        np.testing.assert_allclose(result.rollout, expect, atol=1e-12)

    def test_causality_preserved(self):
        rng = np.random.default_rng(1)
        layers = []
        for _ in range(3):
            raw = np.tril(rng.uniform(0.1, 1.0, (6, 6)))
            layers.append(raw / raw.sum(-1, keepdims=True))
        result = attention_rollout(layers)
        upper = np.triu(result.rollout, k=1)
        assert np.max(np.abs(upper)) == 0.0

    def test_head_and_batch_axes_averaged(self):
        rng = np.random.default_rng(2)
        raw = np.tril(rng.uniform(0.1, 1.0, (2, 3, 5, 5)))  # (heads..., T, T)
        raw = raw / raw.sum(-1, keepdims=True)
        full = attention_rollout([raw])           # batch+head form
        head_mean = attention_rollout([raw[0].mean(0)])
        np.testing.assert_allclose(full.rollout, head_mean.rollout, atol=1e-12)

    def test_labels_follow_token_stream(self):
        labels = token_labels(3, no_reward_tokens=False)
        assert labels == ["z1", "a1", "r1", "z2", "a2", "r2", "z3", "a3"]
        assert token_labels(3, no_reward_tokens=True) == \
            ["z1", "a1", "z2", "a2", "z3", "a3"]

    def test_final_row_is_distribution(self):
        rng = np.random.default_rng(3)
        raw = np.tril(rng.uniform(0.1, 1.0, (4, 4)))
        result = attention_rollout([raw / raw.sum(-1, keepdims=True)])
        row = result.final_row()
        assert row.shape == (4,)
        assert row.sum() == pytest.approx(1.0)


def tiny_models(seed=0):
    ocfg = ObsModelConfig((8, 8, 2), latent_vars=4, latent_classes=4,
                          base_width=4)
    obs_model = ObservationModel(ocfg, np.random.default_rng(seed))
    dcfg = DynamicsConfig(layers=1, d_model=16, heads=2, d_ff=32, seq_len=4,
                          action_count=3, latent_vars=4, latent_classes=4,
                          latent_head=(1, 16), reward_head=(1, 16),
                          discount_head=(1, 16))
    dyn_model = DynamicsModel(dcfg, np.random.default_rng(seed + 1))
    return obs_model, dyn_model


class TestModelRollout:
    def test_window_rollout_files(self, tmp_path):
        obs_model, dyn_model = tiny_models()
        rng = np.random.default_rng(0)
        steps = 4
        z = np.eye(4, dtype=np.float32)[
            rng.integers(0, 4, size=(1, steps, 4))]
        actions = rng.integers(0, 3, size=(1, steps))
        rewards = rng.standard_normal((1, steps)).astype(np.float32)
        result = rollout_from_model(dyn_model, z, actions, rewards)
        t = 3 * steps - 1
        assert result.rollout.shape == (t, t)
        assert len(result.labels) == t
        written = write_rollout(result, str(tmp_path), prefix="map")
        for path in written:
            assert os.path.exists(path)
        names = {os.path.basename(p) for p in written}
        assert "map_rollout.png" in names and "map_final_row.csv" in names


class TestDumps:
    def test_tints_cover_channels(self):
        tints = stack_tints(4)
        assert tints.shape == (4, 3)
        assert np.all(tints >= 0) and np.all(tints <= 1)
        # distinct hues per slot
        assert len({tuple(np.round(t, 3)) for t in tints}) == 4

    def test_static_scene_composites_to_gray(self):
        stack = np.full((6, 6, 4), 0.3, np.float32)
        img = composite_stack(stack)
        assert img.shape == (6, 6, 3)
        np.testing.assert_allclose(img, 0.3, atol=1e-6)

    def test_motion_shows_up_as_color(self):
        stack = np.zeros((6, 6, 4), np.float32)
        stack[2, 2, 0] = 1.0   # only in the oldest slot
        img = composite_stack(stack)
        rgb = img[2, 2]
        assert np.max(rgb) - np.min(rgb) > 0.1

    def test_frame_strip_geometry(self):
        frames = [np.zeros((8, 8), np.float32)] * 3
        strip = frame_strip(frames, scale=2, separator=2)
        assert strip.size == (3 * 16 + 2 * 2, 16)   # (W, H)

    def test_trajectory_dump_and_determinism(self, tmp_path):
        obs_model, dyn_model = tiny_models()
        start = np.random.default_rng(5).random((8, 8, 2)).astype(np.float32)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            files = dump_trajectory(obs_model, dyn_model, start, steps=3,
                                    out_dir=str(out), actions=[0, 1, 2],
                                    samples=2, seed=9)
            assert all(os.path.exists(f) for f in files)
        strips1 = sorted(p for p in os.listdir(out1) if p.endswith(".png"))
        strips2 = sorted(p for p in os.listdir(out2) if p.endswith(".png"))
        assert strips1 == strips2 and len(strips1) >= 2
        for name in strips1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        caption = next(p for p in os.listdir(out1) if p.endswith(".csv"))
        rows = list(csv.reader((out1 / caption).open()))
        assert rows[0][0] == "step"
        assert len(rows) == 1 + 3 + 1   # header + recon row + 3 steps

    def test_start_frame_shape_checked(self, tmp_path):
        obs_model, dyn_model = tiny_models()
        from dreamloop.analysis import DecodeShapeError
        with pytest.raises(DecodeShapeError):
            dump_trajectory(obs_model, dyn_model,
                            np.zeros((4, 4, 2), np.float32), steps=1,
                            out_dir=str(tmp_path))


def bench_settings(**over):
    base = dict(layers=1, d_model=16, heads=2, d_ff=32, seq_len=8,
                horizon=6, latent_vars=4, latent_classes=4, action_count=3,
                batch=2, seed=0)
    base.update(over)
    return BenchSettings(**base)


class TestBench:
    def test_token_count_formulas(self):
        cached, vanilla = token_counts(bench_settings(horizon=6))
        assert cached == 17                     # 3H - 1
        window = bench_settings().dynamics_config().mem_len + 1
        expect_vanilla = sum(min(3 * t + 2, window) for t in range(6))
        assert vanilla == expect_vanilla

    def test_settings_map_to_model_config(self):
        cfg = bench_settings(no_reward_tokens=True).dynamics_config()
        assert cfg.layers == 1 and cfg.d_model == 16
        assert cfg.no_reward_tokens is True

    def test_throughput_modes(self):
        for mode in ("cached", "vanilla"):
            res = throughput_bench(mode, bench_settings())
            assert res.mode == mode
            assert res.elapsed_sec > 0 and res.samples_per_sec > 0
            assert res.hidden.shape == (2, 6, 16)
        with pytest.raises(ValueError):
            throughput_bench("quantum", bench_settings())

    def test_compare_agrees_inside_window(self):
        comp = compare_bench(bench_settings())   # 17 tokens <= 24-window
        assert comp.max_abs_diff < 1e-5
        assert comp.speed_ratio > 0
        text = comp.to_csv()
        assert "max_abs_diff" in text

    def test_compare_refuses_overflowing_stream(self):
        with pytest.raises(ValueError):
            compare_bench(bench_settings(horizon=12))  # 35 tokens > window
