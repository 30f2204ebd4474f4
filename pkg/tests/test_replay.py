"""Experience store with count-balanced sequence sampling."""
import numpy as np
import pytest

from dreamloop.replay import (CapacityExceeded, ExperienceDataset,
                              NotEnoughData, simulate_balanced_growth)


def fill(ds, n, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(n):
        ds.append(rng.random(ds.obs_shape).astype(np.float32),
                  int(rng.integers(0, 3)), float(rng.standard_normal()),
                  i % 17 == 16)


def test_append_and_sample_shapes():
    ds = ExperienceDataset((8, 8, 2), capacity=50)
    fill(ds, 30)
    batch = ds.sample_sequences(4, 6, tau=20.0, rng=np.random.default_rng(0))
    assert batch.observations.shape == (4, 6, 8, 8, 2)
    assert batch.observations.dtype == np.float32
    assert batch.actions.shape == (4, 6) and batch.actions.dtype == np.int64
    assert batch.rewards.shape == (4, 6) and batch.rewards.dtype == np.float32
    assert batch.dones.shape == (4, 6)
    assert np.all(batch.starts + 6 <= ds.size)
    assert batch.observations.min() >= 0.0 and batch.observations.max() <= 1.0


def test_windows_reproduce_stored_steps():
    ds = ExperienceDataset((2, 2, 1), capacity=20)
    fill(ds, 20, seed=3)
    batch = ds.sample_sequences(2, 5, tau=None, rng=np.random.default_rng(1))
    for row, start in enumerate(batch.starts):
        np.testing.assert_array_equal(batch.actions[row],
                                      ds.actions[start:start + 5])
        np.testing.assert_allclose(batch.rewards[row],
                                   ds.rewards[start:start + 5])
        # observations round-trip through the uint8 store
        np.testing.assert_allclose(
            batch.observations[row],
            ds.obs[start:start + 5].astype(np.float32) / 255.0, atol=1e-7)


def test_sampling_deterministic_under_seed():
    ds = ExperienceDataset((2, 2, 1), capacity=40)
    fill(ds, 40)
    a = ds.sample_sequences(5, 4, tau=20.0, rng=np.random.default_rng(9))
    b = ds.sample_sequences(5, 4, tau=20.0, rng=np.random.default_rng(9))
    np.testing.assert_array_equal(a.starts, b.starts)


def test_counts_track_selected_starts():
    ds = ExperienceDataset((2, 2, 1), capacity=30)
    fill(ds, 30)
    assert ds.counts[:30].sum() == 0
    batch = ds.sample_sequences(6, 3, tau=20.0, rng=np.random.default_rng(2))
    assert ds.counts[:30].sum() == 6
    for s in batch.starts:
        assert ds.counts[s] >= 1


def test_balanced_sampling_prefers_unseen():
    ds = ExperienceDataset((2, 2, 1), capacity=50)
    fill(ds, 50)
    # bias the counts: first half heavily sampled already
    ds.counts[:25] = 50
    rng = np.random.default_rng(4)
    picks = np.concatenate(
        [ds.sample_sequences(8, 2, tau=5.0, rng=rng).starts
         for _ in range(40)])
    frac_fresh = (picks >= 25).mean()
    assert frac_fresh > 0.9     # cold half dominates at low temperature


def test_infinite_temperature_is_uniform():
    ds = ExperienceDataset((2, 2, 1), capacity=64)
    fill(ds, 64)
    ds.counts[:32] = 1000    # would repel a balanced sampler
    rng = np.random.default_rng(5)
    picks = np.concatenate(
        [ds.sample_sequences(8, 2, tau=np.inf, rng=rng).starts
         for _ in range(60)])
    frac_low = (picks < 32).mean()
    assert abs(frac_low - 0.5) < 0.1     # counts ignored at tau = inf


def test_capacity_enforced():
    ds = ExperienceDataset((2, 2, 1), capacity=3)
    fill(ds, 3)
    with pytest.raises(CapacityExceeded):
        ds.append(np.zeros((2, 2, 1), np.float32), 0, 0.0, False)


def test_not_enough_data():
    ds = ExperienceDataset((2, 2, 1), capacity=10)
    fill(ds, 3)
    with pytest.raises(NotEnoughData):
        ds.sample_sequences(1, 5, tau=None, rng=np.random.default_rng(0))


def test_save_load_round_trip(tmp_path):
    ds = ExperienceDataset((4, 4, 2), capacity=25)
    fill(ds, 20, seed=8)
    ds.counts[:20] = np.arange(20)
    path = str(tmp_path / "data.twmd")
    ds.save(path)
    back = ExperienceDataset.load(path)
    assert back.size == ds.size and back.capacity == ds.capacity
    np.testing.assert_array_equal(back.obs[:20], ds.obs[:20])
    np.testing.assert_array_equal(back.actions[:20], ds.actions[:20])
    np.testing.assert_allclose(back.rewards[:20], ds.rewards[:20])
    np.testing.assert_array_equal(back.dones[:20], ds.dones[:20])
    np.testing.assert_array_equal(back.counts[:20], ds.counts[:20])


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "junk.twmd"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError):
        ExperienceDataset.load(str(path))


def test_cumulative_selection_mass_monotone():
    ds = simulate_balanced_growth(total=400, tau=20.0, seq_len=8,
                                  draws_per_append=2, batch=16,
                                  rng=np.random.default_rng(0))
    mass = ds.cumulative_selection_mass()
    assert mass.shape == (400,)
    assert np.all(np.diff(mass) >= -1e-12)
    assert mass[-1] == pytest.approx(1.0)
