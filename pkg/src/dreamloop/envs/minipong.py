"""Two-paddle ball game on a unit court, rendered to 64x64 RGB.

The agent owns the right paddle (actions: stay/up/down). A scripted opponent
tracks the ball with capped speed, so angled shots off the paddle edge can
beat it. Scoring is net points (agent minus opponent); the episode ends when
the net score reaches +/-5 (the post-skip step cap lives in the wrapper).

All randomness (serves) comes from the per-episode seed, so trajectories are
reproducible from (seed, action sequence).
"""

from __future__ import annotations

import numpy as np

from .base import RawEnv

BALL_R = 0.025          # half side of the square ball
PADDLE_HALF_H = 0.10
PADDLE_W = 0.03
AGENT_X = 0.94          # inner face of the right paddle
OPP_X = 0.06            # inner face of the left paddle
BALL_VX = 0.02          # per raw frame
MAX_BALL_VY = 0.035
AGENT_SPEED = 0.03
OPP_SPEED = 0.02
WIN_SCORE = 5


class MiniPong(RawEnv):
    action_count = 3    # 0 stay, 1 up, 2 down
    frame_shape = (64, 64)

    def __init__(self):
        self._rng = np.random.default_rng(0)
        self._reset_state()

    def _reset_state(self) -> None:
        self.agent_y = 0.5
        self.opp_y = 0.5
        self.score = 0
        self._serve(direction=1 if self._rng.random() < 0.5 else -1)

    def _serve(self, direction: int) -> None:
        self.ball_x = 0.5
        self.ball_y = 0.5
        self.ball_vx = BALL_VX * direction
        self.ball_vy = float(self._rng.uniform(-0.025, 0.025))

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._reset_state()
        return self.render()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if action == 1:
            self.agent_y -= AGENT_SPEED
        elif action == 2:
            self.agent_y += AGENT_SPEED
        self.agent_y = float(np.clip(self.agent_y, PADDLE_HALF_H, 1.0 - PADDLE_HALF_H))

        # opponent tracks the ball with capped speed
        delta = self.ball_y - self.opp_y
        self.opp_y += float(np.clip(delta, -OPP_SPEED, OPP_SPEED))
        self.opp_y = float(np.clip(self.opp_y, PADDLE_HALF_H, 1.0 - PADDLE_HALF_H))

        self.ball_x += self.ball_vx
        self.ball_y += self.ball_vy

        if self.ball_y - BALL_R < 0.0:
            self.ball_y = BALL_R + (BALL_R - self.ball_y)
            self.ball_vy = abs(self.ball_vy)
        elif self.ball_y + BALL_R > 1.0:
            self.ball_y = (1.0 - BALL_R) - (self.ball_y + BALL_R - 1.0)
            self.ball_vy = -abs(self.ball_vy)

        reward = 0.0
        if self.ball_vx > 0 and self.ball_x + BALL_R >= AGENT_X:
            if abs(self.ball_y - self.agent_y) <= PADDLE_HALF_H + BALL_R:
                offset = (self.ball_y - self.agent_y) / (PADDLE_HALF_H + BALL_R)
                self.ball_x = AGENT_X - BALL_R
                self.ball_vx = -BALL_VX
                self.ball_vy = MAX_BALL_VY * float(offset)
            elif self.ball_x - BALL_R > 1.0:
                reward = -1.0
                self.score -= 1
                self._serve(direction=-1)
        elif self.ball_vx < 0 and self.ball_x - BALL_R <= OPP_X:
            if abs(self.ball_y - self.opp_y) <= PADDLE_HALF_H + BALL_R:
                # opponent returns at a randomized angle so balls do not
                # funnel back to mid-height (keeps blind play unrewarding)
                offset = (self.ball_y - self.opp_y) / (PADDLE_HALF_H + BALL_R)
                kick = float(self._rng.uniform(-0.7, 0.7))
                self.ball_x = OPP_X + BALL_R
                self.ball_vx = BALL_VX
                self.ball_vy = MAX_BALL_VY * float(np.clip(offset + kick, -1.0, 1.0))
            elif self.ball_x + BALL_R < 0.0:
                reward = 1.0
                self.score += 1
                self._serve(direction=1)

        done = abs(self.score) >= WIN_SCORE
        return self.render(), reward, done

    def render(self) -> np.ndarray:
        frame = np.zeros((64, 64, 3), dtype=np.uint8)

        def rows(center: float, half: float) -> tuple[int, int]:
            lo = int(np.clip(round((center - half) * 64), 0, 64))
            hi = int(np.clip(round((center + half) * 64), 0, 64))
            return lo, max(hi, lo + 1)

        ar0, ar1 = rows(self.agent_y, PADDLE_HALF_H)
        frame[ar0:ar1, int(AGENT_X * 64):int((AGENT_X + PADDLE_W) * 64) + 1] = 255
        or0, or1 = rows(self.opp_y, PADDLE_HALF_H)
        frame[or0:or1, int((OPP_X - PADDLE_W) * 64):int(OPP_X * 64) + 1] = 255
        br0, br1 = rows(self.ball_y, BALL_R)
        bc0 = int(np.clip(round((self.ball_x - BALL_R) * 64), 0, 64))
        bc1 = int(np.clip(round((self.ball_x + BALL_R) * 64), 0, 64))
        frame[br0:br1, bc0:max(bc1, bc0 + 1)] = 255
        return frame
