"""Grid-walk coin collection on an 8x8 board, rendered to 64x64 RGB.

One coin is on the board at a time; stepping onto it yields +1 and the coin
respawns at a uniformly random free cell (the only stochasticity). Episodes
end on the wrapper's step cap. Actions: stay/up/down/left/right; moves into
the wall keep the agent in place.
"""

from __future__ import annotations

import numpy as np

from .base import RawEnv

GRID = 8
CELL = 8                       # 64 / GRID
AGENT_COLOR = (255, 255, 255)
COIN_COLOR = (150, 150, 150)   # distinct luminance after grayscale
MOVES = {0: (0, 0), 1: (-1, 0), 2: (1, 0), 3: (0, -1), 4: (0, 1)}


class StochasticCoins(RawEnv):
    action_count = 5
    frame_shape = (64, 64)

    def __init__(self):
        self._rng = np.random.default_rng(0)
        self._reset_state()

    def _reset_state(self) -> None:
        self.agent = (GRID // 2, GRID // 2)
        self.coin = self._spawn_coin()

    def _spawn_coin(self) -> tuple[int, int]:
        while True:
            pos = (int(self._rng.integers(GRID)), int(self._rng.integers(GRID)))
            if pos != self.agent:
                return pos

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._reset_state()
        return self.render()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        dr, dc = MOVES[int(action)]
        r = min(max(self.agent[0] + dr, 0), GRID - 1)
        c = min(max(self.agent[1] + dc, 0), GRID - 1)
        self.agent = (r, c)
        reward = 0.0
        if self.agent == self.coin:
            reward = 1.0
            self.coin = self._spawn_coin()
        return self.render(), reward, False

    def render(self) -> np.ndarray:
        frame = np.zeros((64, 64, 3), dtype=np.uint8)
        ar, ac = self.agent
        frame[ar * CELL:(ar + 1) * CELL, ac * CELL:(ac + 1) * CELL] = AGENT_COLOR
        cr, cc = self.coin
        frame[cr * CELL:(cr + 1) * CELL, cc * CELL:(cc + 1) * CELL] = COIN_COLOR
        return frame
