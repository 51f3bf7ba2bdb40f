"""Deterministic tick-based tower-defense engine.

All mutable state lives in four int64 arrays (see ``_layout``) so the hot
loop can run in the compiled kernel. Enemy positions are thousandths of a
cell: 9000 is the spawn edge, 0 the home line.

Phase order inside one tick: passive sun, plant actions, damage resolution,
enemy movement/eating, wave spawning, cooldown decrement, termination check.
"""
from __future__ import annotations

import copy
import enum
import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _layout as L
from . import kernel
from .errors import (
    CellOccupied,
    CooldownActive,
    InsufficientSun,
    OutOfBounds,
    TerminalStateError,
    TerrainIncompatible,
)
from .levels import COLS, LevelDef, SemanticType, Terrain, UnitSpec, validate_level


class Outcome(enum.IntEnum):
    ONGOING = L.ONGOING
    WON = L.WON
    LOST = L.LOST


@dataclass(frozen=True)
class TickDelta:
    kills: int
    advanced: int
    outcome_changed: bool


@dataclass(frozen=True)
class PlacementResult:
    slot: int
    row: int
    col: int
    kills: int = 0  # enemies destroyed by an Instant unit


@dataclass
class PlantInstance:
    spec: UnitSpec
    hp_remaining: int
    next_action_tick: int


@dataclass
class EnemyInstance:
    spec_id: str
    lane: int
    position: float
    hp_remaining: int
    next_attack_tick: int


@dataclass
class BoardCell:
    terrain: Terrain
    occupant: Optional[PlantInstance]
    has_platform: bool


@dataclass
class LaneMetrics:
    """Per-lane aggregates; every array has one entry per board row."""

    mean_hp: np.ndarray  # mean remaining enemy hp, 0 if the lane is empty
    closest: np.ndarray  # min enemy position / 9, 1.0 if the lane is empty
    past_mid: np.ndarray  # enemies with position < 4.5
    count: np.ndarray
    planted: np.ndarray  # (rows, 5) counts per persistent semantic type


class GameState:
    """Full mutable simulation state for one episode."""

    __slots__ = ("level", "seed", "rng", "scal", "slots", "board", "en")

    def __init__(self, level, seed, rng, scal, slots, board, en):
        self.level: LevelDef = level
        self.seed: int = seed
        self.rng: np.random.Generator = rng
        self.scal: np.ndarray = scal
        self.slots: np.ndarray = slots
        self.board: np.ndarray = board
        self.en: np.ndarray = en

    # scalar views ---------------------------------------------------------
    @property
    def tick(self) -> int:
        return int(self.scal[L.TICK])

    @property
    def sun(self) -> int:
        return int(self.scal[L.SUN])

    @sun.setter
    def sun(self, value: int) -> None:
        # test hook; keeps the sun ledger balanced by booking the difference as earned
        delta = int(value) - int(self.scal[L.SUN])
        self.scal[L.SUN] = value
        self.scal[L.SUN_EARNED] += delta

    @property
    def outcome(self) -> Outcome:
        return Outcome(int(self.scal[L.OUTCOME]))

    @property
    def rows(self) -> int:
        return self.level.rows

    @property
    def kills_total(self) -> int:
        return int(self.scal[L.KILLS_TOTAL])

    @property
    def kills_since_decision(self) -> int:
        return int(self.scal[L.KILLS_SINCE])

    @property
    def advanced_since_decision(self) -> int:
        return int(self.scal[L.ADV_SINCE])

    @property
    def sun_earned(self) -> int:
        return int(self.scal[L.SUN_EARNED])

    @property
    def sun_spent(self) -> int:
        return int(self.scal[L.SUN_SPENT])

    @property
    def crossed(self) -> int:
        return int(self.scal[L.CROSSED])

    @property
    def spawned(self) -> int:
        return int(self.scal[L.N_SPAWNED])

    @property
    def living(self) -> int:
        return int(self.scal[L.N_ALIVE])

    @property
    def total_spawns(self) -> int:
        return int(self.scal[L.N_ENEMIES])

    @property
    def cooldown_remaining(self) -> list[int]:
        return self.slots[L.S_CD_LEFT, : len(self.level.loadout)].tolist()

    @property
    def waves_spawned(self) -> int:
        t = self.tick
        return sum(1 for w in self.level.waves if w.start_tick < t)

    @property
    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    def reset_decision_counters(self) -> None:
        self.scal[L.KILLS_SINCE] = 0
        self.scal[L.ADV_SINCE] = 0

    # structured views -------------------------------------------------------
    def cell(self, row: int, col: int) -> BoardCell:
        b = self.board
        k = int(b[L.B_OCC, row, col])
        occupant = None
        if k >= 0:
            occupant = PlantInstance(self.level.units[k], int(b[L.B_HP, row, col]), int(b[L.B_NEXT, row, col]))
        return BoardCell(Terrain(int(b[L.B_TERRAIN, row, col])), occupant, bool(b[L.B_PLATFORM, row, col]))

    def enemies(self) -> list[EnemyInstance]:
        en = self.en
        out = []
        for i in range(int(self.scal[L.FIRST_LIVE]), int(self.scal[L.NEXT_SPAWN])):
            if en[L.E_STATUS, i] == L.ALIVE:
                out.append(EnemyInstance(
                    self.level.enemies[int(en[L.E_KIND, i])].id,
                    int(en[L.E_LANE, i]),
                    int(en[L.E_POS, i]) / L.POS_SCALE,
                    int(en[L.E_HP, i]),
                    int(en[L.E_NEXT_ATK, i]),
                ))
        return out

    def copy(self) -> "GameState":
        return GameState(self.level, self.seed, copy.deepcopy(self.rng), self.scal.copy(),
                         self.slots.copy(), self.board.copy(), self.en.copy())

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.scal, self.slots, self.board, self.en):
            h.update(np.ascontiguousarray(arr).astype("<i8", copy=False).tobytes())
        return h.hexdigest()

    # test helpers -------------------------------------------------------------
    def add_enemy(self, enemy_id: str, lane: int, position: float, hp: Optional[int] = None) -> int:
        """Insert a live enemy directly (tests and scenario setup).

        The enemy is appended to the spawn table as already spawned at the
        current tick; pending spawns keep their order behind it.
        """
        spec_index = next(i for i, e in enumerate(self.level.enemies) if e.id == enemy_id)
        spec = self.level.enemies[spec_index]
        col = np.zeros((L.NEF, 1), dtype=np.int64)
        col[L.E_STATUS, 0] = L.ALIVE
        col[L.E_LANE, 0] = lane
        col[L.E_POS, 0] = int(round(position * L.POS_SCALE))
        col[L.E_HP, 0] = spec.base_hit_points if hp is None else hp
        col[L.E_STEP, 0] = spec.speed * L.POS_SCALE // 100
        col[L.E_DMG, 0] = spec.damage_per_hit
        col[L.E_PERIOD, 0] = spec.attack_period
        col[L.E_SPAWN, 0] = self.tick
        col[L.E_KIND, 0] = spec_index
        at = int(self.scal[L.NEXT_SPAWN])
        self.en = np.ascontiguousarray(np.concatenate([self.en[:, :at], col, self.en[:, at:]], axis=1))
        self.scal[L.NEXT_SPAWN] += 1
        self.scal[L.N_ENEMIES] += 1
        self.scal[L.N_SPAWNED] += 1
        self.scal[L.N_ALIVE] += 1
        return at


def _spawn_table(level: LevelDef, rng: np.random.Generator) -> np.ndarray:
    rows = []
    index = {e.id: i for i, e in enumerate(level.enemies)}
    for wave in level.waves:
        j = 0
        for entry in wave.entries:
            spec = level.enemies[index[entry.enemy_id]]
            for _ in range(entry.count):
                lane = int(rng.integers(level.rows)) if entry.lane is None else entry.lane
                jitter = int(rng.integers(level.spawn_jitter + 1)) if level.spawn_jitter else 0
                rows.append((wave.start_tick + j * level.spawn_spacing + jitter, lane, index[entry.enemy_id], spec))
                j += 1
    rows.sort(key=lambda r: r[0])  # stable
    en = np.zeros((L.NEF, len(rows)), dtype=np.int64)
    for i, (t, lane, kind, spec) in enumerate(rows):
        en[L.E_LANE, i] = lane
        en[L.E_HP, i] = spec.base_hit_points
        en[L.E_STEP, i] = spec.speed * L.POS_SCALE // 100
        en[L.E_DMG, i] = spec.damage_per_hit
        en[L.E_PERIOD, i] = spec.attack_period
        en[L.E_SPAWN, i] = t
        en[L.E_KIND, i] = kind
    return en


def new_game(level: LevelDef, seed: int) -> GameState:
    """Fresh game at tick 0; all randomness is drawn from ``seed``."""
    validate_level(level)
    rng = np.random.default_rng(seed)
    en = _spawn_table(level, rng)

    slots = np.zeros((L.NSF, L.MAX_SLOTS), dtype=np.int64)
    for k, u in enumerate(level.units):
        slots[:, k] = (int(u.semantic_type), u.sun_cost, u.cooldown, u.hit_points, u.damage_per_hit,
                       u.attack_period, u.range, u.sun_yield, u.sun_period, 0)

    board = np.zeros((L.NBF, level.rows, COLS), dtype=np.int64)
    board[L.B_TERRAIN] = np.array(level.terrain, dtype=np.int64)
    board[L.B_OCC] = -1

    scal = np.zeros(L.NSCAL, dtype=np.int64)
    scal[L.SUN] = level.starting_sun
    scal[L.PASSIVE_PERIOD] = level.passive_sun_period
    scal[L.PASSIVE_YIELD] = level.passive_sun_yield
    scal[L.ROWS] = level.rows
    scal[L.N_ENEMIES] = en.shape[1]
    scal[L.N_SLOTS] = len(level.units)
    return GameState(level, seed, rng, scal, slots, board, en)


def advance(state: GameState, n: int) -> int:
    """Run up to ``n`` ticks (fewer if the game ends); returns ticks run."""
    if n <= 0:
        return 0
    return kernel.run_ticks(state.scal, state.slots, state.board, state.en, n)


def tick(state: GameState) -> TickDelta:
    if state.scal[L.OUTCOME] != L.ONGOING:
        raise TerminalStateError(f"game already ended ({state.outcome.name})")
    kernel.run_ticks(state.scal, state.slots, state.board, state.en, 1)
    return TickDelta(int(state.scal[L.LAST_KILLS]), int(state.scal[L.LAST_ADV]),
                     state.scal[L.OUTCOME] != L.ONGOING)


# ----------------------------------------------------------------------------
# placement

def cell_accepts(state: GameState, unit_type: int, row: int, col: int) -> bool:
    """Whether a unit of ``unit_type`` may go on (row, col) terrain-wise."""
    b = state.board
    terrain = b[L.B_TERRAIN, row, col]
    if terrain == L_BLOCKED:
        return False
    if unit_type == L.T_PREPARE:
        return terrain == L_WATER and not b[L.B_PLATFORM, row, col]
    if b[L.B_OCC, row, col] >= 0:
        return False
    return terrain == L_LAND or bool(b[L.B_PLATFORM, row, col])


L_LAND, L_WATER, L_BLOCKED = int(Terrain.LAND), int(Terrain.WATER), int(Terrain.BLOCKED)


def place_unit(state: GameState, slot: int, row: int, col: int) -> PlacementResult:
    """Spend sun and put loadout unit ``slot`` on (row, col)."""
    if state.scal[L.OUTCOME] != L.ONGOING:
        raise TerminalStateError("game already ended")
    if not 0 <= slot < len(state.level.units):
        raise OutOfBounds(f"slot {slot} outside loadout of {len(state.level.units)}")
    if not (0 <= row < state.level.rows and 0 <= col < COLS):
        raise OutOfBounds(f"cell ({row}, {col}) outside {state.level.rows}x{COLS} board")
    spec = state.level.units[slot]
    if state.scal[L.SUN] < spec.sun_cost:
        raise InsufficientSun(f"{spec.id} costs {spec.sun_cost}, holding {state.sun}")
    if state.slots[L.S_CD_LEFT, slot] > 0:
        raise CooldownActive(f"{spec.id} ready in {int(state.slots[L.S_CD_LEFT, slot])} ticks")
    b = state.board
    terrain = int(b[L.B_TERRAIN, row, col])
    stype = int(spec.semantic_type)
    if terrain == L_BLOCKED:
        raise TerrainIncompatible(f"cell ({row}, {col}) is blocked")
    if stype == L.T_PREPARE:
        if terrain != L_WATER:
            raise TerrainIncompatible(f"{spec.id} needs water")
        if b[L.B_PLATFORM, row, col]:
            raise CellOccupied(f"cell ({row}, {col}) already has a platform")
    else:
        if b[L.B_OCC, row, col] >= 0:
            raise CellOccupied(f"cell ({row}, {col}) is occupied")
        if terrain == L_WATER and not b[L.B_PLATFORM, row, col]:
            raise TerrainIncompatible(f"cell ({row}, {col}) is bare water")

    t = int(state.scal[L.TICK])
    state.scal[L.SUN] -= spec.sun_cost
    state.scal[L.SUN_SPENT] += spec.sun_cost
    state.slots[L.S_CD_LEFT, slot] = spec.cooldown
    kills = 0
    if stype == L.T_PREPARE:
        b[L.B_PLATFORM, row, col] = 1
    elif stype == L.T_INSTANT:
        kills = _detonate(state, row, col, spec.damage_per_hit)
    else:
        b[L.B_OCC, row, col] = slot
        b[L.B_HP, row, col] = spec.hit_points
        b[L.B_NEXT, row, col] = t + (spec.sun_period if stype == L.T_SUN else 0)
    return PlacementResult(slot, row, col, kills)


def _detonate(state: GameState, row: int, col: int, damage: int) -> int:
    en, s = state.en, state.scal
    kills = 0
    for i in range(int(s[L.FIRST_LIVE]), int(s[L.NEXT_SPAWN])):
        if en[L.E_STATUS, i] != L.ALIVE or abs(int(en[L.E_LANE, i]) - row) > 1:
            continue
        cell = min(int(en[L.E_POS, i]) // L.POS_SCALE, L.LAST_CELL)
        if abs(cell - col) > 1:
            continue
        en[L.E_HP, i] -= damage
        if en[L.E_HP, i] <= 0:
            en[L.E_STATUS, i] = L.DEAD
            kills += 1
    if kills:
        s[L.N_ALIVE] -= kills
        s[L.KILLS_TOTAL] += kills
        s[L.KILLS_SINCE] += kills
        first = int(s[L.FIRST_LIVE])
        nxt = int(s[L.NEXT_SPAWN])
        while first < nxt and en[L.E_STATUS, first] >= L.DEAD:
            first += 1
        s[L.FIRST_LIVE] = first
    return kills


# ----------------------------------------------------------------------------
# aggregates

def _alive_view(state: GameState):
    s = state.scal
    lo, hi = int(s[L.FIRST_LIVE]), int(s[L.NEXT_SPAWN])
    en = state.en[:, lo:hi]
    alive = en[L.E_STATUS] == L.ALIVE
    return en[L.E_LANE][alive], en[L.E_POS][alive], en[L.E_HP][alive]


def planted_counts(state: GameState) -> np.ndarray:
    """(rows, 5) counts of persistent units per lane and semantic type."""
    b = state.board
    occ = b[L.B_OCC]
    types = np.where(occ >= 0, state.slots[L.S_TYPE][np.maximum(occ, 0)], -1)
    out = np.zeros((state.level.rows, 5), dtype=np.int64)
    for t in range(4):
        out[:, t] = (types == t).sum(axis=1)
    out[:, L.T_PREPARE] = b[L.B_PLATFORM].sum(axis=1)
    return out


def snapshot_metrics(state: GameState) -> LaneMetrics:
    rows = state.level.rows
    lane, pos, hp = _alive_view(state)
    count = np.bincount(lane, minlength=rows).astype(np.int64)
    hp_sum = np.bincount(lane, weights=hp, minlength=rows)
    mean_hp = np.divide(hp_sum, count, out=np.zeros(rows), where=count > 0)
    closest = np.full(rows, float(L.SPAWN_POS))
    if lane.size:
        np.minimum.at(closest, lane, pos.astype(np.float64))
    past_mid = np.bincount(lane[pos < 4500], minlength=rows).astype(np.int64)
    return LaneMetrics(mean_hp, closest / L.SPAWN_POS, past_mid, count, planted_counts(state))


def kill_ledger_holds(state: GameState) -> bool:
    return state.kills_total + state.living + state.crossed == state.spawned


def sun_ledger_holds(state: GameState) -> bool:
    return state.sun + state.sun_spent == state.sun_earned + state.level.starting_sun


def unit_type(state: GameState, slot: int) -> SemanticType:
    return state.level.units[slot].semantic_type
