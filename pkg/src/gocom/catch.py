"""Catch: a pixel environment where a paddle must meet a falling ball.

16x16 binary frames; the ball drops one row per step from the top at a
uniformly random column, the paddle (3 px wide, bottom row) moves one
column per action.  A ball reaching the bottom row scores +1 when it lands
on the paddle, then respawns; an episode is 10 balls.  Observations stack
the 3 most recent frames (zero-padded right after reset) into 16x16x3,
i.e. 768 reals in [0, 1].
"""

from __future__ import annotations

from typing import Optional

import numpy as np

GRID = 16
PADDLE_HALF = 1                      # paddle spans center +/- 1
PADDLE_MIN, PADDLE_MAX = 1, GRID - 2
BALLS_PER_EPISODE = 10
FRAME_STACK = 3
ACTIONS = 3                          # 0 left, 1 stay, 2 right
OBS_SHAPE = (GRID, GRID, FRAME_STACK)
OBS_DIMS = GRID * GRID * FRAME_STACK

_MOVES = (-1, 0, 1)


class CatchEnv:
    """Seedable episodic environment; step() is invalid once done until reset()."""

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)
        self._frames = np.zeros(OBS_SHAPE)
        self.done = True

    @property
    def action_count(self) -> int:
        return ACTIONS

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.paddle = GRID // 2
        self.balls_left = BALLS_PER_EPISODE
        self.done = False
        self._spawn()
        self._frames = np.zeros(OBS_SHAPE)
        self._push_frame()
        return self._obs()

    def _spawn(self):
        self.ball_row = 0
        self.ball_col = int(self._rng.integers(0, GRID))

    def _render(self) -> np.ndarray:
        f = np.zeros((GRID, GRID))
        f[self.ball_row, self.ball_col] = 1.0
        f[GRID - 1, self.paddle - PADDLE_HALF:self.paddle + PADDLE_HALF + 1] = 1.0
        return f

    def _push_frame(self):
        self._frames[:, :, :-1] = self._frames[:, :, 1:]
        self._frames[:, :, -1] = self._render()

    def _obs(self) -> np.ndarray:
        return self._frames.copy()

    def step(self, action: int):
        if self.done:
            raise RuntimeError("step() after episode end; call reset()")
        if action not in (0, 1, 2):
            raise ValueError(f"action must be in {{0,1,2}}, got {action}")
        self.paddle = int(np.clip(self.paddle + _MOVES[action], PADDLE_MIN, PADDLE_MAX))
        self.ball_row += 1
        reward = 0.0
        if self.ball_row == GRID - 1:
            if abs(self.ball_col - self.paddle) <= PADDLE_HALF:
                reward = 1.0
            self.balls_left -= 1
            if self.balls_left == 0:
                self.done = True
            else:
                self._spawn()
        self._push_frame()
        return self._obs(), reward, self.done


def greedy_oracle_action(env: CatchEnv) -> int:
    """Move the paddle center toward the ball column (scripted baseline)."""
    if env.ball_col < env.paddle:
        return 0
    if env.ball_col > env.paddle:
        return 2
    return 1
