"""Decision-level environment: observations, action masks, rewards and
fast-forwarding over stretches where only the no-op is available."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _layout as L
from .errors import MaskedActionError, TerminalUseError
from .levels import MAX_LOADOUT, MAX_ROWS, LevelDef, apply_difficulty
from .sim import GameState, advance, new_game, snapshot_metrics
from .strategies import N_ACTIONS, NOOP, PlacementPlan, execute_plan, plan_all

OBS_SIZE = 88

# observation block offsets
OBS_LOADOUT = slice(0, 36)
OBS_COOLDOWN = slice(36, 42)
OBS_SUN = 42
OBS_HP = slice(43, 48)
OBS_CLOSEST = slice(48, 53)
OBS_PAST_MID = slice(53, 58)
OBS_COUNT = slice(58, 63)
OBS_PLANTED = slice(63, 88)

SUN_SCALE = 1000.0
HP_SCALE = 1000.0


@dataclass(frozen=True)
class EnvConfig:
    decision_interval: int = 30
    kill_reward: float = 1.2
    advance_penalty: float = 1 / 200
    win_bonus: float = 1.0
    loss_penalty: float = -5.0

    def __post_init__(self):
        if self.decision_interval < 1:
            raise ValueError("decision_interval must be >= 1")


@dataclass
class DecisionStep:
    observation: np.ndarray
    mask: np.ndarray
    reward_prev: float
    terminal: bool
    info: dict = field(default_factory=dict)


def decision_reward(config: EnvConfig, kills: int, advanced: int, terminal: bool = False,
                    won: bool = False) -> float:
    """Reward attributed to one decision step."""
    reward = config.kill_reward * kills - config.advance_penalty * advanced
    if terminal:
        reward += config.win_bonus if won else config.loss_penalty
    return reward


def encode_observation(state: GameState) -> np.ndarray:
    """88-wide feature vector; lanes beyond the level's rows read as empty."""
    obs = np.zeros(OBS_SIZE)
    level = state.level
    n = len(level.units)
    for k, unit in enumerate(level.units):
        obs[6 * k + int(unit.semantic_type)] = 1.0
    cd_total = state.slots[L.S_COOLDOWN, :n]
    cd_left = state.slots[L.S_CD_LEFT, :n]
    obs[36:36 + n] = np.divide(cd_left, cd_total, out=np.zeros(n), where=cd_total > 0)
    obs[OBS_SUN] = state.scal[L.SUN] / SUN_SCALE
    m = snapshot_metrics(state)
    rows = level.rows
    obs[43:43 + rows] = m.mean_hp / HP_SCALE
    obs[OBS_CLOSEST] = 1.0
    obs[48:48 + rows] = m.closest
    obs[53:53 + rows] = m.past_mid
    obs[58:58 + rows] = m.count
    obs[63:63 + 5 * rows] = m.planted.ravel()
    return obs


def _mask_from(plans) -> np.ndarray:
    mask = np.ones(N_ACTIONS, dtype=bool)
    for k, p in enumerate(plans):
        mask[k] = p is not None
    return mask


def compute_mask(state: GameState) -> np.ndarray:
    """Availability of (SowSun, Attack, Defense, Prepare, NoOp)."""
    return _mask_from(plan_all(state))


class TowerEnv:
    """One episode at a time; call :meth:`reset` before :meth:`step`."""

    def __init__(self, config: Optional[EnvConfig] = None, trace: bool = False):
        self.config = config or EnvConfig()
        self.state: Optional[GameState] = None
        self.mask: Optional[np.ndarray] = None
        self.terminal = True
        self.won = False
        self.kills = 0
        self.advanced = 0
        self.decisions = 0
        self.trace: Optional[list[dict]] = [] if trace else None
        self._plans: list[Optional[PlacementPlan]] = []

    # ------------------------------------------------------------------
    def reset(self, level: LevelDef, difficulty: int = 0, seed: int = 0) -> DecisionStep:
        self.state = new_game(apply_difficulty(level, difficulty), seed)
        self.terminal = False
        self.won = False
        self.kills = self.advanced = self.decisions = 0
        if self.trace is not None:
            self.trace.clear()
            self._record("reset", level=level.id, difficulty=difficulty, seed=seed)
        self._refresh()
        self._fast_forward()
        return self._emit()

    def step(self, action: int) -> DecisionStep:
        if self.state is None or self.terminal:
            raise TerminalUseError("episode is over; call reset()")
        action = int(action)
        if not 0 <= action < N_ACTIONS or not self.mask[action]:
            raise MaskedActionError(f"action {action} is masked (mask={self.mask.astype(int).tolist()})")
        if action != NOOP:
            execute_plan(self._plans[action], self.state)
        self.decisions += 1
        if self.trace is not None:
            self._record("action", action=action)
        self._chunk()
        self._refresh()
        self._fast_forward()
        return self._emit()

    # ------------------------------------------------------------------
    def _ended(self) -> bool:
        s = self.state.scal
        return s[L.OUTCOME] != L.ONGOING or s[L.TICK] >= self.state.level.max_ticks

    def _chunk(self) -> None:
        s = self.state.scal
        n = min(self.config.decision_interval, self.state.level.max_ticks - int(s[L.TICK]))
        if s[L.OUTCOME] == L.ONGOING and n > 0:
            advance(self.state, n)

    def _refresh(self) -> None:
        if self._ended():
            self.terminal = True
            self.won = self.state.scal[L.OUTCOME] == L.WON
            self._plans = [None] * 4
        elif self._any_unit_ready():
            self._plans = plan_all(self.state)
        else:
            self._plans = [None] * 4
        self.mask = _mask_from(self._plans)

    def _any_unit_ready(self) -> bool:
        st = self.state
        n = len(st.level.units)
        ready = (st.slots[L.S_CD_LEFT, :n] == 0) & (st.slots[L.S_COST, :n] <= st.scal[L.SUN])
        return bool(ready.any())

    def _fast_forward(self) -> None:
        while not self.terminal and self.mask.sum() < 2:
            self._chunk()
            self._refresh()

    def _emit(self) -> DecisionStep:
        cfg = self.config
        s = self.state.scal
        kills, adv = int(s[L.KILLS_SINCE]), int(s[L.ADV_SINCE])
        reward = decision_reward(cfg, kills, adv, self.terminal, self.won)
        self.state.reset_decision_counters()
        self.kills += kills
        self.advanced += adv
        info = {"tick": int(s[L.TICK]), "kills": kills, "advanced": adv,
                "won": self.won, "decisions": self.decisions}
        if self.trace is not None:
            self._record("decision", reward=reward, terminal=self.terminal,
                         mask=self.mask.astype(int).tolist(), state=self.state.fingerprint())
        return DecisionStep(encode_observation(self.state), self.mask.copy(), reward, self.terminal, info)

    def _record(self, event: str, **payload) -> None:
        self.trace.append({"tick": int(self.state.scal[L.TICK]), "event": event, **payload})

    def write_trace(self, path) -> None:
        """Line-delimited JSON records: tick, event type, payload."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.trace or []:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


assert MAX_LOADOUT * 6 + MAX_LOADOUT + 1 + 4 * MAX_ROWS + 5 * MAX_ROWS == OBS_SIZE
