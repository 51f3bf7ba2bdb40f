import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerbench import _layout as L
from towerbench.errors import (CellOccupied, CooldownActive, InsufficientSun, OutOfBounds,
                               TerminalStateError, TerrainIncompatible)
from towerbench.levels import SUITE_IDS, Terrain, apply_difficulty, get_level
from towerbench.sim import (Outcome, TickDelta, advance, kill_ledger_holds, new_game, place_unit,
                            snapshot_metrics, sun_ledger_holds, tick)

from conftest import make_level

GUN = ("[unit]\nid=gun\nsemantic_type=AttackRanged\nsun_cost=0\ncooldown=0\nhit_points=100\n"
       "damage_per_hit=20\nattack_period=30\nrange=9\n")
DUMMY = "[enemy]\nid=dummy\nbase_hit_points=60\nspeed=1\ndamage_per_hit=1\nattack_period=10\n"
SPRINTER = "[enemy]\nid=sprinter\nbase_hit_points=50\nspeed=10\ndamage_per_hit=1\nattack_period=10\n"


def test_new_game_contract():
    lvl = get_level("S02")
    s = new_game(lvl, 7)
    assert s.tick == 0 and s.sun == lvl.starting_sun and s.outcome is Outcome.ONGOING
    assert (s.board[L.B_OCC] == -1).all() and not s.board[L.B_PLATFORM].any()
    assert s.cooldown_remaining == [0] * len(lvl.units)
    assert s.fingerprint() == new_game(lvl, 7).fingerprint()
    assert s.rng_state != new_game(lvl, 8).rng_state


def test_empty_tick():
    s = new_game(make_level(waves=(("5000", ["zombie 0 1"]),)), 0)
    assert tick(s) == TickDelta(0, 0, False)
    assert s.tick == 1


def test_enemy_reaching_home_line_loses():
    s = new_game(make_level(waves=(("5000", ["sprinter 0 1"]),), sections=SPRINTER), 0)
    s.add_enemy("sprinter", 0, 0.05)
    d = tick(s)
    assert d.outcome_changed and s.outcome is Outcome.LOST
    assert s.crossed == 1 and d.advanced == 1
    with pytest.raises(TerminalStateError):
        tick(s)
    with pytest.raises(TerminalStateError):
        place_unit(s, 0, 0, 0)


def _brute_force_kill_tick(first_tick, hp, damage, period):
    """Reference: the attacker fires on its first ready tick with a target, then every period."""
    t, left = first_tick, hp
    while True:
        left -= damage
        if left <= 0:
            return t
        t += period


def test_ranged_attacker_kill_timing():
    lvl = make_level(loadout=["gun"], waves=(("8000", ["dummy 0 1"]),), sections=GUN + DUMMY)
    s = new_game(lvl, 0)
    place_unit(s, 0, 0, 0)
    advance(s, 10)
    T = s.tick
    s.add_enemy("dummy", 0, 8.5)
    kills_at = {}
    while s.tick <= T + 90:
        t = s.tick
        d = tick(s)
        if d.kills:
            kills_at[t] = d.kills
    assert kills_at == {T + 60: 1}
    assert _brute_force_kill_tick(T, 60, 20, 30) == T + 60


def test_placement_errors_leave_state_unchanged():
    lvl = make_level(rows=2, terrain=["WLLLLLLLX", "LLLLLLLLL"],
                     loadout=["peashooter", "lilypad", "wallnut"], starting_sun=99)
    s = new_game(lvl, 0)
    before = s.fingerprint()
    with pytest.raises(InsufficientSun):
        place_unit(s, 0, 0, 1)
    with pytest.raises(OutOfBounds):
        place_unit(s, 5, 0, 1)
    with pytest.raises(OutOfBounds):
        place_unit(s, 2, 2, 0)
    with pytest.raises(TerrainIncompatible):
        place_unit(s, 2, 0, 8)  # blocked
    with pytest.raises(TerrainIncompatible):
        place_unit(s, 2, 0, 0)  # bare water
    with pytest.raises(TerrainIncompatible):
        place_unit(s, 1, 0, 1)  # platform on land
    assert s.fingerprint() == before

    r = place_unit(s, 1, 0, 0)
    cell = s.cell(0, 0)
    assert cell.has_platform and cell.occupant is None and r.kills == 0
    assert s.sun == 99 - 25
    with pytest.raises(CooldownActive):
        place_unit(s, 1, 1, 0)
    place_unit(s, 2, 0, 0)  # defense on a platform
    assert s.cell(0, 0).occupant.spec.id == "wallnut" and s.cell(0, 0).terrain is Terrain.WATER
    advance(s, 400)
    s.sun = 500
    with pytest.raises(CellOccupied):
        place_unit(s, 2, 0, 0)


def test_insufficient_by_one():
    lvl = make_level(loadout=["peashooter"], starting_sun=99)
    s = new_game(lvl, 0)
    with pytest.raises(InsufficientSun):
        place_unit(s, 0, 0, 0)
    s.sun = 100
    place_unit(s, 0, 0, 0)
    assert s.sun == 0 and s.cooldown_remaining == [75]
    assert sun_ledger_holds(s)


def test_instant_hits_neighbourhood_and_vanishes():
    lvl = make_level(rows=3, loadout=["cherry_bomb"], starting_sun=150,
                     waves=(("8000", ["zombie 0 1"]),))
    s = new_game(lvl, 0)
    near = [s.add_enemy("zombie", 0, 4.5), s.add_enemy("zombie", 2, 3.2)]
    far = s.add_enemy("zombie", 1, 6.0)
    r = place_unit(s, 0, 1, 4)
    assert r.kills == 2 and s.kills_since_decision == 2
    assert all(s.en[L.E_STATUS, i] == L.DEAD for i in near)
    assert s.en[L.E_STATUS, far] == L.ALIVE
    assert s.cell(1, 4).occupant is None
    assert kill_ledger_holds(s)


def test_snapshot_metrics_examples():
    lvl = make_level(rows=3, loadout=["sunflower"], waves=(("8000", ["zombie 0 1"]),))
    s = new_game(lvl, 0)
    m = snapshot_metrics(s)
    assert (m.mean_hp == 0).all() and (m.closest == 1).all() and not m.past_mid.any() and not m.count.any()
    assert not m.planted.any()

    s.add_enemy("zombie", 2, 4.0, hp=50)
    m = snapshot_metrics(s)
    assert (m.mean_hp[2], m.closest[2], m.past_mid[2], m.count[2]) == (50, pytest.approx(4 / 9), 1, 1)

    s.add_enemy("zombie", 0, 3.0, hp=10)
    s.add_enemy("zombie", 0, 6.0, hp=30)
    m = snapshot_metrics(s)
    assert (m.mean_hp[0], m.closest[0], m.past_mid[0], m.count[0]) == (20, pytest.approx(3 / 9), 1, 2)


def test_enemy_eats_blocking_plant():
    lvl = make_level(loadout=["sunflower"], waves=(("8000", ["zombie 0 1"]),))
    s = new_game(lvl, 0)
    place_unit(s, 0, 0, 3)
    s.add_enemy("zombie", 0, 3.9)
    advance(s, 1)
    assert s.board[L.B_HP, 0, 3] == 300 - 10
    pos = s.enemies()[0].position
    advance(s, 300)
    assert s.cell(0, 3).occupant is None
    assert s.enemies()[0].position < pos


def test_win_when_all_spawned_and_cleared():
    lvl = make_level(loadout=["cherry_bomb"], starting_sun=150, waves=(("0", ["zombie 0 1"]),))
    s = new_game(lvl, 0)
    tick(s)  # spawns at tick 0
    assert s.spawned == 1 and s.outcome is Outcome.ONGOING
    place_unit(s, 0, 0, 8)
    d = tick(s)
    assert d.outcome_changed and s.outcome is Outcome.WON


def _random_play(level_id, seed, difficulty, n_ticks, rng):
    """(before, after) snapshots around each stretch of ticks under random placements."""
    s = new_game(apply_difficulty(get_level(level_id), difficulty), seed)
    n = len(s.level.units)
    pairs = []
    while s.outcome is Outcome.ONGOING and s.tick < n_ticks:
        for _ in range(3):
            k, r, c = int(rng.integers(n)), int(rng.integers(s.rows)), int(rng.integers(9))
            try:
                place_unit(s, k, r, c)
            except Exception:
                pass
        before = s.copy()
        advance(s, int(rng.integers(1, 40)))
        pairs.append((before, s.copy()))
    return pairs


@given(st.sampled_from(SUITE_IDS), st.integers(0, 2**31), st.sampled_from([0, 100_000, 200_000]))
@settings(max_examples=25, deadline=None)
def test_state_invariants(level_id, seed, difficulty):
    rng = np.random.default_rng(seed)
    pairs = _random_play(level_id, seed, difficulty, 4000, rng)
    for prev, s in pairs:
        for x in (prev, s):
            assert x.sun >= 0 and min(x.cooldown_remaining) >= 0
            assert sun_ledger_holds(x) and kill_ledger_holds(x)
        # enemies never move back toward the spawn edge
        live = (prev.en[L.E_STATUS] == L.ALIVE) & (s.en[L.E_STATUS] != L.PENDING)
        assert (s.en[L.E_POS][live] <= prev.en[L.E_POS][live]).all()
        # without placements in between, a surviving plant never regains hit points
        same = (prev.board[L.B_OCC] >= 0) & (prev.board[L.B_OCC] == s.board[L.B_OCC])
        assert (s.board[L.B_HP][same] <= prev.board[L.B_HP][same]).all()
        if prev.outcome is not Outcome.ONGOING:
            assert s.outcome is prev.outcome
    last = pairs[-1][1]
    assert (last.outcome is Outcome.LOST) == (last.crossed > 0)


def test_plant_hp_never_increases_between_ticks():
    lvl = make_level(loadout=["wallnut"], waves=(("0", ["zombie 0 3"]),))
    s = new_game(lvl, 0)
    place_unit(s, 0, 0, 8)
    last = int(s.board[L.B_HP, 0, 8])
    while s.outcome is Outcome.ONGOING and s.board[L.B_OCC, 0, 8] >= 0 and s.tick < 3000:
        tick(s)
        hp = int(s.board[L.B_HP, 0, 8])
        assert hp <= last
        last = hp


def test_determinism_of_full_runs():
    a = _random_play("S06", 3, 100_000, 6000, np.random.default_rng(1))
    b = _random_play("S06", 3, 100_000, 6000, np.random.default_rng(1))
    assert [x[1].fingerprint() for x in a] == [y[1].fingerprint() for y in b]
