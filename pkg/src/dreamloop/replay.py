"""Append-only experience dataset with count-balanced sequence sampling.

Start indices for training windows are drawn from a softmax over negative
visitation counts, p_i proportional to exp(-v_i / tau), so rarely used
entries are preferred; tau = None means exact uniform sampling. Counts are
incremented at drawn starts only. Windows are contiguous index ranges and
may cross episode boundaries; the done flags ride along.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"TWMD"
VERSION = 1


class NotEnoughData(RuntimeError):
    pass


class CapacityExceeded(RuntimeError):
    pass


@dataclass
class SampledBatch:
    observations: np.ndarray   # (N, l, H, W, S) float32 in [0, 1]
    actions: np.ndarray        # (N, l) int64
    rewards: np.ndarray        # (N, l) float32
    dones: np.ndarray          # (N, l) bool
    starts: np.ndarray         # (N,) int64


class ExperienceDataset:
    def __init__(self, obs_shape: tuple[int, int, int], capacity: int):
        self.obs_shape = tuple(obs_shape)
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, *self.obs_shape), dtype=np.uint8)
        self.actions = np.zeros(self.capacity, dtype=np.int32)
        self.rewards = np.zeros(self.capacity, dtype=np.float32)
        self.dones = np.zeros(self.capacity, dtype=np.uint8)
        self.counts = np.zeros(self.capacity, dtype=np.int64)
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def append(self, observation: np.ndarray, action: int, reward: float,
               done: bool) -> None:
        if self.size >= self.capacity:
            raise CapacityExceeded(f"dataset full at capacity {self.capacity}")
        obs = np.asarray(observation)
        if obs.shape != self.obs_shape:
            raise ValueError(f"observation shape {obs.shape} != {self.obs_shape}")
        if obs.dtype == np.uint8:
            self.obs[self.size] = obs
        else:
            self.obs[self.size] = np.clip(np.rint(obs * 255.0), 0, 255).astype(np.uint8)
        self.actions[self.size] = int(action)
        self.rewards[self.size] = float(reward)
        self.dones[self.size] = 1 if done else 0
        self.counts[self.size] = 0
        self.size += 1

    def start_probabilities(self, seq_len: int,
                            tau: float | None) -> np.ndarray:
        """p_i over valid starts [0, T - seq_len]; tau=None -> exact uniform."""
        n = self.size - seq_len + 1
        if n <= 0:
            raise NotEnoughData(f"need at least {seq_len} entries, have {self.size}")
        if tau is None or np.isinf(tau):
            return np.full(n, 1.0 / n)
        v = self.counts[:n].astype(np.float64)
        logits = -v / float(tau)
        logits -= logits.max()
        e = np.exp(logits)
        return e / e.sum()

    def sample_sequences(self, n_seq: int, seq_len: int, tau: float | None,
                         rng: np.random.Generator) -> SampledBatch:
        p = self.start_probabilities(seq_len, tau)
        starts = rng.choice(p.size, size=n_seq, replace=True, p=p).astype(np.int64)
        np.add.at(self.counts, starts, 1)
        idx = starts[:, None] + np.arange(seq_len)[None, :]
        return SampledBatch(
            observations=self.obs[idx].astype(np.float32) / 255.0,
            actions=self.actions[idx].astype(np.int64),
            rewards=self.rewards[idx].astype(np.float32),
            dones=self.dones[idx].astype(bool),
            starts=starts,
        )

    def time_on_prefix_report(self) -> str:
        """CSV of cumulative selection-mass fraction vs entry index."""
        total = self.counts[:self.size].sum()
        out = io.StringIO()
        out.write("index,cumulative_fraction\n")
        if total == 0:
            return out.getvalue()
        cum = np.cumsum(self.counts[:self.size]) / total
        for i, f in enumerate(cum):
            out.write(f"{i},{f:.6f}\n")
        return out.getvalue()

    def cumulative_selection_mass(self) -> np.ndarray:
        total = self.counts[:self.size].sum()
        if total == 0:
            return np.zeros(self.size)
        return np.cumsum(self.counts[:self.size]) / total

    # -- serialization ----------------------------------------------------------

    def save(self, path: str) -> None:
        h, w, s = self.obs_shape
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<IQIIIQ", VERSION, self.size, h, w, s, self.capacity))
            f.write(self.obs[:self.size].tobytes())
            f.write(self.actions[:self.size].astype("<i4").tobytes())
            f.write(self.rewards[:self.size].astype("<f4").tobytes())
            f.write(self.dones[:self.size].tobytes())
            f.write(self.counts[:self.size].astype("<i8").tobytes())

    @classmethod
    def load(cls, path: str) -> "ExperienceDataset":
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != MAGIC:
                raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
            header = struct.Struct("<IQIIIQ")
            version, size, h, w, s, cap = header.unpack(f.read(header.size))
            if version != VERSION:
                raise ValueError(f"unsupported dataset version {version}")
            ds = cls((h, w, s), cap)
            ds.size = size
            n_obs = size * h * w * s
            ds.obs[:size] = np.frombuffer(f.read(n_obs), dtype=np.uint8).reshape(size, h, w, s)
            ds.actions[:size] = np.frombuffer(f.read(4 * size), dtype="<i4")
            ds.rewards[:size] = np.frombuffer(f.read(4 * size), dtype="<f4")
            ds.dones[:size] = np.frombuffer(f.read(size), dtype=np.uint8)
            ds.counts[:size] = np.frombuffer(f.read(8 * size), dtype="<i8")
        return ds


def simulate_balanced_growth(total: int, tau: float | None, seq_len: int,
                             draws_per_append: int, batch: int,
                             rng: np.random.Generator,
                             warmup: int | None = None) -> ExperienceDataset:
    """Grow a dataset linearly while sampling, mimicking online training.

    Appends dummy entries one at a time; after each append beyond `warmup`
    (default: seq_len), performs `draws_per_append` sampling calls of size
    `batch`. Returns the dataset with its selection counts populated.
    """
    ds = ExperienceDataset((1, 1, 1), capacity=total)
    warm = seq_len if warmup is None else warmup
    blank = np.zeros((1, 1, 1), dtype=np.uint8)
    for t in range(total):
        ds.append(blank, 0, 0.0, False)
        if ds.size >= max(warm, seq_len):
            for _ in range(draws_per_append):
                ds.sample_sequences(batch, seq_len, tau, rng)
    return ds
