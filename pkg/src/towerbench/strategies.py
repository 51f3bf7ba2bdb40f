"""Scripted low-level strategies and the static heuristic selector (HAI).

Each strategy picks the cheapest affordable, ready unit of its semantic group
that has a legal cell under the group's placement rule. The heuristic
selector scores the four strategies with fixed, level-independent formulas
and runs the best one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from . import _layout as L
from .sim import GameState, place_unit

NOOP = 4
N_ACTIONS = 5


class StrategyKind(enum.IntEnum):
    SOW_SUN = 0
    ATTACK = 1
    DEFENSE = 2
    PREPARE = 3


GROUPS = {
    StrategyKind.SOW_SUN: (L.T_SUN,),
    StrategyKind.ATTACK: (L.T_RANGED, L.T_MELEE, L.T_INSTANT),
    StrategyKind.DEFENSE: (L.T_DEFENSE,),
    StrategyKind.PREPARE: (L.T_PREPARE,),
}

# Hand-tuned selector weights; constants by design.
W_SOW = 1.0
W_ATTACK_COUNT = 0.8
W_ATTACK_MID = 1.5
W_DEFENSE = 1.2
W_PREPARE = 0.6

MID_POS = 4500
_NO_ENEMY = L.SPAWN_POS


@dataclass(frozen=True)
class PlacementPlan:
    slot: int
    row: int
    col: int


class _View:
    """Plain-list snapshot of the fields the planners read."""

    __slots__ = ("rows", "terr", "plat", "occ", "sun", "ready", "types", "costs",
                 "closest", "count", "past_mid", "attack_order", "_water")

    def __init__(self, state: GameState):
        b = state.board
        self.rows = rows = state.level.rows
        self.terr = b[L.B_TERRAIN].tolist()
        self.plat = b[L.B_PLATFORM].tolist()
        self.occ = b[L.B_OCC].tolist()
        self.sun = int(state.scal[L.SUN])
        n = len(state.level.units)
        self.types = state.slots[L.S_TYPE, :n].tolist()
        self.costs = state.slots[L.S_COST, :n].tolist()
        cd = state.slots[L.S_CD_LEFT, :n].tolist()
        self.ready = [cd[k] == 0 and self.costs[k] <= self.sun for k in range(n)]

        s = state.scal
        lo, hi = int(s[L.FIRST_LIVE]), int(s[L.NEXT_SPAWN])
        status = state.en[L.E_STATUS, lo:hi].tolist()
        lanes = state.en[L.E_LANE, lo:hi].tolist()
        pos = state.en[L.E_POS, lo:hi].tolist()
        closest = [_NO_ENEMY] * rows
        count = [0] * rows
        past_mid = 0
        for st, ln, p in zip(status, lanes, pos):
            if st != L.ALIVE:
                continue
            count[ln] += 1
            if p < closest[ln]:
                closest[ln] = p
            if p < MID_POS:
                past_mid += 1
        self.closest = closest
        self.count = count
        self.past_mid = past_mid
        # lanes holding enemies come first, even when those just spawned
        self.attack_order = sorted(range(rows), key=lambda r: (closest[r], count[r] == 0, r))
        self._water = None

    def accepts(self, typ: int, r: int, c: int) -> bool:
        terrain = self.terr[r][c]
        if terrain == 2:
            return False
        if typ == L.T_PREPARE:
            return terrain == 1 and not self.plat[r][c]
        if self.occ[r][c] >= 0:
            return False
        return terrain == 0 or bool(self.plat[r][c])

    def closest_cell(self, r: int) -> int:
        """Cell index of the lane's closest enemy; 9 when the lane is empty."""
        if self.count[r] == 0:
            return 9
        return min(self.closest[r] // L.POS_SCALE, L.LAST_CELL)

    def water_cells(self) -> list[tuple[int, int]]:
        if self._water is None:
            self._water = [(r, c) for r in range(self.rows) for c in range(9) if self.terr[r][c] == 1]
        return self._water


def _cell_for(view: _View, typ: int) -> Optional[tuple[int, int]]:
    accepts = view.accepts
    if typ == L.T_SUN:
        for r in sorted(range(view.rows), key=lambda r: (view.count[r], r)):
            for c in range(9):
                if accepts(typ, r, c):
                    return r, c
        return None
    if typ == L.T_RANGED or typ == L.T_MELEE:
        for r in view.attack_order:
            for c in range(9):
                if accepts(typ, r, c):
                    return r, c
        return None
    if typ == L.T_INSTANT:
        for r in view.attack_order:
            if view.count[r] == 0:
                continue
            ce = view.closest_cell(r)
            candidates = [(max(abs(dr), abs(dc)), r + dr, ce + dc)
                          for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                          if 0 <= r + dr < view.rows and 0 <= ce + dc < 9]
            for _, rr, cc in sorted(candidates):
                if accepts(typ, rr, cc):
                    return rr, cc
        return None
    if typ == L.T_DEFENSE:
        for r in view.attack_order:
            c = view.closest_cell(r) - 1
            if c >= 0 and accepts(typ, r, c):
                return r, c
        return None
    if typ == L.T_PREPARE:
        target = view.attack_order[0]
        best = None
        for r, c in view.water_cells():
            if accepts(typ, r, c):
                key = (abs(r - target) + c, r, c)
                if best is None or key < best:
                    best = key
        return None if best is None else (best[1], best[2])
    return None


def _plan(view: _View, strategy: int) -> Optional[PlacementPlan]:
    group = GROUPS[strategy]
    candidates = sorted((view.costs[k], k) for k, t in enumerate(view.types) if t in group and view.ready[k])
    for _, k in candidates:
        cell = _cell_for(view, view.types[k])
        if cell is not None:
            return PlacementPlan(k, cell[0], cell[1])
    return None


def plan(strategy: int, state: GameState) -> Optional[PlacementPlan]:
    """Placement the strategy would make now, or None when it has no legal move."""
    if state.scal[L.OUTCOME] != L.ONGOING:
        return None
    return _plan(_View(state), StrategyKind(strategy))


def plan_all(state: GameState) -> list[Optional[PlacementPlan]]:
    if state.scal[L.OUTCOME] != L.ONGOING:
        return [None] * len(StrategyKind)
    view = _View(state)
    return [_plan(view, k) for k in StrategyKind]


def execute(strategy: int, state: GameState) -> bool:
    """Carry out the strategy's plan; False (state untouched) when it has none."""
    p = plan(strategy, state)
    if p is None:
        return False
    return execute_plan(p, state)


def execute_plan(p: PlacementPlan, state: GameState) -> bool:
    # plans satisfy every placement precondition, so an exception here is a planner bug
    try:
        place_unit(state, p.slot, p.row, p.col)
    except Exception as exc:  # pragma: no cover
        raise AssertionError(f"planner produced an illegal placement {p}: {exc}") from exc
    return True


def _raw_priorities(view: _View, state: GameState) -> list[float]:
    occ = view.occ
    types = view.types
    producers = 0
    for r in range(view.rows):
        for k in occ[r]:
            if k >= 0 and types[k] == L.T_SUN:
                producers += 1
    sow = W_SOW * max(0, 2 * view.rows - producers)

    total = sum(view.count)
    attack = W_ATTACK_COUNT * total + W_ATTACK_MID * view.past_mid

    defense = 0.0
    for r in range(view.rows):
        if view.count[r] == 0:
            continue
        ce = view.closest_cell(r)
        covered = any(occ[r][c] >= 0 and types[occ[r][c]] == L.T_DEFENSE for c in range(ce + 1))
        if not covered:
            defense += max(0.0, 1.0 - view.closest[r] / L.SPAWN_POS)
    defense *= W_DEFENSE

    exposed = 0
    for r in range(view.rows):
        if view.count[r] and 1 in view.terr[r] and not any(view.plat[r]):
            exposed += 1
    prepare = W_PREPARE * exposed
    return [sow, attack, defense, prepare]


def hai_priorities(state: GameState) -> list[float]:
    """Priority per strategy; -inf for strategies without a legal plan.

    Reads only game-state fields, never the level's identity.
    """
    if state.scal[L.OUTCOME] != L.ONGOING:
        return [-math.inf] * len(StrategyKind)
    view = _View(state)
    scores = _raw_priorities(view, state)
    return [scores[k] if _plan(view, k) is not None else -math.inf for k in StrategyKind]


def select_from(priorities: list[float]) -> int:
    best, best_score = NOOP, -math.inf
    for k, score in enumerate(priorities):
        if score > best_score:
            best, best_score = k, score
    return best


def hai_select(state: GameState) -> int:
    """Index of the strategy HAI runs now; NOOP when nothing is plannable."""
    return select_from(hai_priorities(state))
