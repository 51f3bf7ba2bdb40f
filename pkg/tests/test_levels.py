import dataclasses
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerbench.errors import RangeError, SchemaError, UnknownUnit, ValidationError
from towerbench.levels import (
    SUITE_IDS, DifficultyParams, LevelDef, SemanticType, Terrain, WaveEntry, WaveSpec, apply_difficulty,
    builtin_catalog, builtin_suite, get_level, load_bundled, parse_level, resolve_levels, scaled_count,
    scaled_hp, serialize_level,
)

from conftest import level_text, make_level

FIXTURES = Path(__file__).parent / "fixtures"


def test_six_semantic_types():
    assert len(SemanticType) == 6
    assert [t.label for t in SemanticType] == ["SunProducer", "AttackRanged", "AttackMelee", "Defense",
                                               "Prepare", "Instant"]
    assert SemanticType.from_label("Defense") is SemanticType.DEFENSE
    with pytest.raises(SchemaError):
        SemanticType.from_label("Healer")


def test_minimal_document():
    lvl = make_level()
    assert lvl.rows == 1
    assert len(lvl.loadout) == 1
    assert lvl.cols == 9
    assert lvl.waves == (WaveSpec(900, (WaveEntry("zombie", 0, 1),)),)


def test_rows_six_rejected():
    with pytest.raises(ValidationError) as err:
        parse_level(level_text(rows=6))
    assert err.value.field == "level.rows"


@pytest.mark.parametrize("text, exc", [
    ("[terrain]\nLLLLLLLLL\n", SchemaError),
    (level_text().replace("rows=1", "rows=one"), SchemaError),
    (level_text().replace("[loadout]\nsunflower", "[loadout]\nmystery"), UnknownUnit),
    (level_text(waves=(("900", ["ghost 0 1"]),)), UnknownUnit),
    (level_text(terrain=["LLLLLLLLQ"]), SchemaError),
    (level_text(terrain=["LLLL"]), ValidationError),
    (level_text(waves=(("900", ["zombie 3 1"]),)), ValidationError),
    (level_text(waves=(("900", ["zombie 0 0"]),)), ValidationError),
    (level_text(waves=(("900", ["zombie 0"]),)), SchemaError),
    (level_text(waves=(("900", ["zombie 0 1"]), ("300", ["zombie 0 1"]))), ValidationError),
    (level_text(loadout=["sunflower"] * 2), ValidationError),
    (level_text(loadout=["sunflower", "peashooter", "repeater", "wallnut", "tallnut", "lilypad",
                         "chomper"]), ValidationError),
    (level_text(extra="colour=blue"), SchemaError),
    (level_text() + "[shop]\n", SchemaError),
])
def test_malformed_documents(text, exc):
    with pytest.raises(exc):
        parse_level(text)


def test_inline_unit_override():
    sections = "[unit]\nid=sunflower\nsemantic_type=SunProducer\nsun_cost=10\ncooldown=5\nhit_points=1\n" \
               "sun_yield=5\nsun_period=10\n"
    lvl = parse_level(level_text(sections=sections))
    assert lvl.units[0].sun_cost == 10
    assert builtin_catalog().units["sunflower"].sun_cost == 50


def test_inline_unit_invariants():
    bad = "[unit]\nid=odd\nsemantic_type=Defense\nsun_cost=10\ncooldown=5\nhit_points=10\nsun_yield=5\n"
    with pytest.raises(ValidationError):
        parse_level(level_text(loadout=["odd"], sections=bad))


def test_s01_matches_frozen_snapshot():
    frozen = json.loads((FIXTURES / "S01.json").read_text())
    assert json.loads(json.dumps(dataclasses.asdict(load_bundled("S01")))) == frozen


def test_suite_shape():
    suite = builtin_suite()
    assert [lvl.id for lvl in suite] == list(SUITE_IDS) and len(suite) == 8
    for lvl in suite:
        assert parse_level(serialize_level(lvl)) == lvl
    assert any(Terrain.WATER in row for lvl in suite for row in lvl.terrain)
    assert get_level("S03") is suite[2]
    with pytest.raises(UnknownUnit):
        get_level("S42")


def test_resolve_levels_accepts_files(tmp_path):
    path = tmp_path / "x.lvl"
    path.write_text(level_text())
    a, b = resolve_levels(["S01", str(path)])
    assert a.id == "S01" and b.id == "T"


def test_difficulty_examples():
    lvl = make_level()
    assert apply_difficulty(lvl, 0) == lvl
    assert scaled_hp(100, 100_000) == 200
    assert scaled_count(2, 200_000) == 4
    assert scaled_count(3, 100_000) == 5  # ceil(4.5)
    p = DifficultyParams.of(0)
    assert p.hp_multiplier == p.count_multiplier == 1
    with pytest.raises(RangeError):
        apply_difficulty(lvl, 200_001)
    with pytest.raises(RangeError):
        apply_difficulty(lvl, -1)
    scaled = apply_difficulty(lvl, 100_000)
    assert scaled.enemies[0].base_hit_points == 400
    with pytest.raises(ValidationError):
        apply_difficulty(scaled, 50_000)


@given(st.sampled_from(SUITE_IDS), st.integers(0, 200_000), st.integers(0, 200_000))
@settings(max_examples=200, deadline=None)
def test_difficulty_monotone(level_id, d1, d2):
    d1, d2 = sorted((d1, d2))
    base = get_level(level_id)
    a, b = apply_difficulty(base, d1), apply_difficulty(base, d2)
    for ea, eb in zip(a.enemies, b.enemies):
        assert ea.base_hit_points <= eb.base_hit_points
    assert a.total_spawns() <= b.total_spawns()
    for lvl in (a, b):
        assert lvl.loadout == base.loadout and lvl.terrain == base.terrain
        assert [w.start_tick for w in lvl.waves] == [w.start_tick for w in base.waves]
        assert [[e.lane for e in w.entries] for w in lvl.waves] == [[e.lane for e in w.entries]
                                                                    for w in base.waves]


@given(st.integers(0, 200_000), st.integers(1, 50), st.integers(1, 10_000))
def test_scaling_formulas(d, count, hp):
    import math
    from fractions import Fraction
    assert scaled_count(count, d) == math.ceil(Fraction(count) * (1 + Fraction(d, 200_000)))
    assert scaled_hp(hp, d) == math.floor(Fraction(hp) * (1 + Fraction(d, 100_000)))


UNITS = sorted(builtin_catalog().units)
ENEMIES = sorted(builtin_catalog().enemies)


@st.composite
def levels(draw):
    rows = draw(st.integers(1, 5))
    terrain = [draw(st.text("LWX", min_size=9, max_size=9)) for _ in range(rows)]
    loadout = draw(st.lists(st.sampled_from(UNITS), min_size=1, max_size=6, unique=True))
    n_waves = draw(st.integers(1, 3))
    starts = sorted(draw(st.lists(st.integers(0, 5000), min_size=n_waves, max_size=n_waves)))
    waves = []
    for s in starts:
        entries = draw(st.lists(st.tuples(st.sampled_from(ENEMIES),
                                          st.one_of(st.just("*"), st.integers(0, rows - 1).map(str)),
                                          st.integers(1, 5)), min_size=1, max_size=3))
        waves.append((str(s), [f"{e} {ln} {c}" for e, ln, c in entries]))
    extra = "\n".join([f"passive_sun_period={draw(st.integers(0, 600))}",
                       f"spawn_jitter={draw(st.integers(0, 50))}",
                       f"description={draw(st.sampled_from(['', 'plain', 'two words']))}"])
    return parse_level(level_text(rows=rows, terrain=terrain, loadout=loadout, waves=waves,
                                  starting_sun=draw(st.integers(0, 500)), extra=extra))


@given(levels())
@settings(max_examples=150, deadline=None)
def test_serialize_round_trip(lvl: LevelDef):
    assert parse_level(serialize_level(lvl)) == lvl


def test_serialize_keeps_inline_overrides():
    sections = "[enemy]\nid=zombie\nbase_hit_points=7\nspeed=3\ndamage_per_hit=1\nattack_period=4\n"
    lvl = parse_level(level_text(sections=sections))
    text = serialize_level(lvl)
    assert "[enemy]" in text
    assert parse_level(text) == lvl
