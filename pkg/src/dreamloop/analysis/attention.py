"""Attention rollout over the interleaved latent/action/reward token sequence.

Per layer the head-averaged attention matrix gets an identity term for the
residual connection and is renormalized over the causally visible columns;
multiplying these across layers attributes the final hidden state back to
input tokens. Maps are emitted as grayscale PNGs with a modality-colored
column-label strip, plus raw CSV.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

MODALITY_COLORS = {
    "z": (214, 69, 65),    # latent tokens
    "a": (59, 178, 115),   # action tokens
    "r": (64, 115, 222),   # reward tokens
}


def token_labels(steps: int, no_reward_tokens: bool = False) -> list[str]:
    """Labels for one training window: z1,a1,r1,...  (final reward omitted)."""
    labels: list[str] = []
    for t in range(1, steps + 1):
        labels.append(f"z{t}")
        labels.append(f"a{t}")
        if not no_reward_tokens and t < steps:
            labels.append(f"r{t}")
    return labels


@dataclass
class AttentionRollout:
    per_layer: list[np.ndarray]   # head-averaged, identity-added, renormalized
    rollout: np.ndarray           # (T, T) attribution of each position to inputs
    labels: list[str]

    def final_row(self) -> np.ndarray:
        """Attribution of the last position over all input tokens."""
        return self.rollout[-1]


def attention_rollout(layer_weights, mask: np.ndarray | None = None,
                      labels: list[str] | None = None) -> AttentionRollout:
    """Roll attention out across layers.

    `layer_weights` is a list of per-layer attention arrays shaped (T, T),
    (H, T, T), or (B, H, T, T) (batch entry 0 is used). `mask` is an optional
    boolean (T, T) visibility matrix; by default causal lower-triangular.
    """
    squares: list[np.ndarray] = []
    for li, w in enumerate(layer_weights):
        arr = np.asarray(w, dtype=np.float64)
        if arr.ndim == 4:
            arr = arr[0]
        if arr.ndim == 3:
            arr = arr.mean(axis=0)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(
                f"layer {li}: expected square attention (got {arr.shape}); "
                "rollout needs a fresh-window forward pass without memory")
        squares.append(arr)

    if squares:
        size = squares[0].shape[0]
    elif mask is not None:
        size = np.asarray(mask).shape[0]
    elif labels is not None:
        size = len(labels)
    else:
        raise ValueError("cannot infer token count: no layers, mask, or labels")

    if mask is None:
        mask = np.tril(np.ones((size, size), dtype=bool))
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (size, size):
            raise ValueError(
                f"mask shape {mask.shape} does not match attention {(size, size)}")
    if labels is None:
        labels = [f"t{i + 1}" for i in range(size)]
    if len(labels) != size:
        raise ValueError(f"{len(labels)} labels for {size} tokens")

    per_layer: list[np.ndarray] = []
    rollout = np.eye(size)
    for li, arr in enumerate(squares):
        if arr.shape != (size, size):
            raise ValueError(
                f"layer {li} shape {arr.shape} differs from layer 0 {(size, size)}")
        augmented = np.where(mask, arr + np.eye(size), 0.0)
        row_sums = augmented.sum(axis=1, keepdims=True)
        if np.any(row_sums <= 0):
            raise ValueError(f"layer {li}: a row has no visible columns")
        normalized = augmented / row_sums
        per_layer.append(normalized)
        rollout = normalized @ rollout
    return AttentionRollout(per_layer=per_layer, rollout=rollout, labels=labels)


def rollout_from_model(dyn_model, latents, actions, rewards) -> AttentionRollout:
    """Run one fresh-window forward pass and roll out its attention maps.

    `rewards` may cover all steps or just the l-1 intermediate ones; only the
    intermediate rewards become tokens.
    """
    steps = int(np.asarray(actions).shape[1])
    rewards = np.asarray(rewards, dtype=np.float32)[:, :steps - 1]
    collected: list[np.ndarray] = []
    dyn_model.aggregate(latents, actions, rewards, memory=None,
                        collect_attention=collected)
    labels = token_labels(steps, dyn_model.cfg.no_reward_tokens)
    return attention_rollout(collected, labels=labels)


# -- rendering --------------------------------------------------------------------


def matrix_to_csv(matrix: np.ndarray, labels: list[str]) -> str:
    import io
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["query"] + labels)
    for i, row in enumerate(matrix):
        writer.writerow([labels[i]] + [f"{v:.8f}" for v in row])
    return out.getvalue()


def matrix_to_image(matrix: np.ndarray, labels: list[str],
                    scale: int | None = None) -> Image.Image:
    """Grayscale attention map with a modality-colored column-label strip."""
    arr = np.asarray(matrix, dtype=np.float64)
    size = arr.shape[0]
    if scale is None:
        scale = max(2, 512 // max(size, 1))
    peak = arr.max()
    gray = np.zeros_like(arr) if peak <= 0 else arr / peak
    gray8 = (gray * 255).round().astype(np.uint8)
    rgb = np.repeat(gray8[:, :, None], 3, axis=2)
    strip_rows = max(1, size // 16)
    strip = np.zeros((strip_rows, size, 3), dtype=np.uint8)
    for j, label in enumerate(labels):
        strip[:, j] = MODALITY_COLORS.get(label[:1], (128, 128, 128))
    full = np.concatenate([strip, rgb], axis=0)
    img = Image.fromarray(full, mode="RGB")
    return img.resize((size * scale, (size + strip_rows) * scale),
                      Image.Resampling.NEAREST)


def write_rollout(result: AttentionRollout, out_dir: str,
                  prefix: str = "attention") -> list[str]:
    """Write rollout + per-layer maps (PNG and CSV) and the final-row CSV."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def emit(name: str, matrix: np.ndarray):
        png = os.path.join(out_dir, f"{name}.png")
        matrix_to_image(matrix, result.labels).save(png)
        csv_path = os.path.join(out_dir, f"{name}.csv")
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write(matrix_to_csv(matrix, result.labels))
        written.extend([png, csv_path])

    emit(f"{prefix}_rollout", result.rollout)
    for li, mat in enumerate(result.per_layer):
        emit(f"{prefix}_layer{li}", mat)
    row_path = os.path.join(out_dir, f"{prefix}_final_row.csv")
    with open(row_path, "w", encoding="utf-8") as f:
        f.write("token,attribution\n")
        for label, value in zip(result.labels, result.final_row()):
            f.write(f"{label},{value:.8f}\n")
    written.append(row_path)
    return written
