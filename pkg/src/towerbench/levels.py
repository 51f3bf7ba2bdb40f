"""Level content: unit and enemy catalogs, the level document format,
difficulty scaling and the bundled synthetic suite.

Documents are line-oriented text split into bracketed sections::

    [level]
    id=S01
    rows=5
    starting_sun=50
    [terrain]
    LLLLLLLLL
    ...
    [loadout]
    sunflower
    peashooter
    [wave]
    start_tick=600
    zombie 2 1
    zombie * 2

``*`` in the lane column draws the lane from the game's seeded generator.
``[unit]`` and ``[enemy]`` sections (the catalog syntax) may also appear in a
level document; they override the catalog entry of the same id.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional

from .errors import RangeError, SchemaError, UnknownUnit, ValidationError

MAX_ROWS = 5
COLS = 9
MAX_LOADOUT = 6
MAX_DIFFICULTY = 200_000
SUITE_IDS = tuple(f"S{i:02d}" for i in range(1, 9))


class SemanticType(enum.IntEnum):
    SUN_PRODUCER = 0
    ATTACK_RANGED = 1
    ATTACK_MELEE = 2
    DEFENSE = 3
    PREPARE = 4
    INSTANT = 5

    @property
    def label(self) -> str:
        return _TYPE_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "SemanticType":
        for member, label in _TYPE_LABELS.items():
            if label == text:
                return member
        raise SchemaError(f"unknown semantic type {text!r}")


_TYPE_LABELS = {
    SemanticType.SUN_PRODUCER: "SunProducer",
    SemanticType.ATTACK_RANGED: "AttackRanged",
    SemanticType.ATTACK_MELEE: "AttackMelee",
    SemanticType.DEFENSE: "Defense",
    SemanticType.PREPARE: "Prepare",
    SemanticType.INSTANT: "Instant",
}

# Types that stay on the board after placement (everything but Instant).
PERSISTENT_TYPES = tuple(t for t in SemanticType if t != SemanticType.INSTANT)


class Terrain(enum.IntEnum):
    LAND = 0
    WATER = 1
    BLOCKED = 2


_TERRAIN_CHARS = {"L": Terrain.LAND, "W": Terrain.WATER, "X": Terrain.BLOCKED}
_TERRAIN_TO_CHAR = {v: k for k, v in _TERRAIN_CHARS.items()}


@dataclass(frozen=True)
class UnitSpec:
    id: str
    semantic_type: SemanticType
    sun_cost: int
    cooldown: int
    hit_points: int = 0
    damage_per_hit: int = 0
    attack_period: int = 0
    range: int = 0
    sun_yield: int = 0
    sun_period: int = 0

    def validate(self, path: str = "unit") -> None:
        _check(self.sun_cost >= 0, f"{path}.sun_cost", "must be >= 0")
        _check(self.cooldown >= 0, f"{path}.cooldown", "must be >= 0")
        if self.semantic_type != SemanticType.INSTANT:
            _check(self.hit_points >= 1, f"{path}.hit_points", "persistent units need >= 1")
        if self.damage_per_hit > 0 and self.semantic_type != SemanticType.INSTANT:
            _check(self.attack_period > 0, f"{path}.attack_period",
                   "must be > 0 when damage_per_hit > 0")
        _check(self.damage_per_hit >= 0, f"{path}.damage_per_hit", "must be >= 0")
        _check(self.range >= 0, f"{path}.range", "must be >= 0")
        if self.semantic_type == SemanticType.SUN_PRODUCER:
            _check(self.sun_yield > 0 and self.sun_period > 0, f"{path}.sun_yield",
                   "SunProducer needs sun_yield > 0 and sun_period > 0")
        else:
            _check(self.sun_yield == 0, f"{path}.sun_yield", "only SunProducer yields sun")


@dataclass(frozen=True)
class EnemySpec:
    id: str
    base_hit_points: int
    speed: int  # cells per 100 ticks
    damage_per_hit: int
    attack_period: int

    def validate(self, path: str = "enemy") -> None:
        for name in ("base_hit_points", "speed", "damage_per_hit", "attack_period"):
            _check(getattr(self, name) > 0, f"{path}.{name}", "must be > 0")
        # one tick of movement must stay below one cell
        _check(self.speed < 100, f"{path}.speed", "must be < 100 cells per 100 ticks")


@dataclass(frozen=True)
class WaveEntry:
    enemy_id: str
    lane: Optional[int]  # None: drawn per enemy from the game rng
    count: int


@dataclass(frozen=True)
class WaveSpec:
    start_tick: int
    entries: tuple[WaveEntry, ...]


@dataclass(frozen=True)
class DifficultyParams:
    difficulty: int
    hp_multiplier: float
    count_multiplier: float

    @classmethod
    def of(cls, difficulty: int) -> "DifficultyParams":
        _check_difficulty(difficulty)
        return cls(difficulty, 1 + difficulty / 100_000, 1 + 0.5 * difficulty / 100_000)


@dataclass(frozen=True)
class LevelDef:
    id: str
    rows: int
    terrain: tuple[tuple[Terrain, ...], ...]
    loadout: tuple[str, ...]
    waves: tuple[WaveSpec, ...]
    units: tuple[UnitSpec, ...]  # resolved loadout, same order
    enemies: tuple[EnemySpec, ...]  # resolved wave enemies, sorted by id
    starting_sun: int = 50
    passive_sun_period: int = 300
    passive_sun_yield: int = 25
    max_ticks: int = 9000
    spawn_spacing: int = 60
    spawn_jitter: int = 0
    difficulty: int = 0
    description: str = ""

    @property
    def cols(self) -> int:
        return COLS

    def enemy(self, enemy_id: str) -> EnemySpec:
        for spec in self.enemies:
            if spec.id == enemy_id:
                return spec
        raise UnknownUnit(enemy_id)

    def total_spawns(self) -> int:
        return sum(e.count for w in self.waves for e in w.entries)

    def with_id(self, new_id: str) -> "LevelDef":
        return dataclasses.replace(self, id=new_id)


@dataclass
class Catalog:
    units: dict[str, UnitSpec] = field(default_factory=dict)
    enemies: dict[str, EnemySpec] = field(default_factory=dict)

    def merged(self, other: "Catalog") -> "Catalog":
        return Catalog({**self.units, **other.units}, {**self.enemies, **other.enemies})


def _check(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ValidationError(path, message)


def _check_difficulty(difficulty: int) -> None:
    if not isinstance(difficulty, int) or not 0 <= difficulty <= MAX_DIFFICULTY:
        raise RangeError(f"difficulty must be an integer in [0, {MAX_DIFFICULTY}], got {difficulty!r}")


# --------------------------------------------------------------------------
# document reading

def _sections(text: str) -> list[tuple[str, int, list[tuple[int, str]]]]:
    sections: list[tuple[str, int, list[tuple[int, str]]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise SchemaError(f"line {lineno}: malformed section header {raw!r}")
            sections.append((line[1:-1].strip().lower(), lineno, []))
            continue
        if not sections:
            raise SchemaError(f"line {lineno}: content before first section header")
        sections[-1][2].append((lineno, line))
    return sections


def _key_values(lines: list[tuple[int, str]], section: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in lines:
        if "=" not in line:
            raise SchemaError(f"line {lineno}: expected key=value in [{section}]")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise SchemaError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        out[key] = value
    return out


def _int(kv: dict[str, str], key: str, section: str, default: Optional[int] = None) -> int:
    if key not in kv:
        if default is None:
            raise SchemaError(f"[{section}] missing required key {key!r}")
        return default
    try:
        return int(kv.pop(key))
    except ValueError:
        raise SchemaError(f"[{section}] {key} is not an integer") from None


_UNIT_INT_KEYS = ("sun_cost", "cooldown", "hit_points", "damage_per_hit", "attack_period",
                  "range", "sun_yield", "sun_period")
_ENEMY_INT_KEYS = ("base_hit_points", "speed", "damage_per_hit", "attack_period")


def _parse_unit(kv: dict[str, str]) -> UnitSpec:
    kv = dict(kv)
    if "id" not in kv or "semantic_type" not in kv:
        raise SchemaError("[unit] needs id and semantic_type")
    uid = kv.pop("id")
    stype = SemanticType.from_label(kv.pop("semantic_type"))
    required = {"sun_cost", "cooldown"}
    values = {k: _int(kv, k, "unit", None if k in required else 0) for k in _UNIT_INT_KEYS}
    if kv:
        raise SchemaError(f"[unit] {uid}: unknown keys {sorted(kv)}")
    spec = UnitSpec(uid, stype, **values)
    spec.validate(f"unit[{uid}]")
    return spec


def _parse_enemy(kv: dict[str, str]) -> EnemySpec:
    kv = dict(kv)
    if "id" not in kv:
        raise SchemaError("[enemy] needs id")
    eid = kv.pop("id")
    values = {k: _int(kv, k, "enemy") for k in _ENEMY_INT_KEYS}
    if kv:
        raise SchemaError(f"[enemy] {eid}: unknown keys {sorted(kv)}")
    spec = EnemySpec(eid, **values)
    spec.validate(f"enemy[{eid}]")
    return spec


def parse_catalog(text: str) -> Catalog:
    cat = Catalog()
    for name, lineno, lines in _sections(text):
        if name == "unit":
            spec = _parse_unit(_key_values(lines, name))
            cat.units[spec.id] = spec
        elif name == "enemy":
            spec = _parse_enemy(_key_values(lines, name))
            cat.enemies[spec.id] = spec
        else:
            raise SchemaError(f"line {lineno}: unexpected section [{name}] in catalog")
    return cat


@lru_cache(maxsize=1)
def builtin_catalog() -> Catalog:
    """The synthetic unit/enemy catalog shipped with the package."""
    text = resources.files("towerbench.data").joinpath("catalog.txt").read_text("utf-8")
    return parse_catalog(text)


def parse_level(text: str, catalog: Optional[Catalog] = None) -> LevelDef:
    """Parse and validate a level document.

    Raises SchemaError for malformed documents, ValidationError when an
    invariant is violated and UnknownUnit for ids missing from the catalog.
    """
    base = builtin_catalog() if catalog is None else catalog
    header: Optional[dict[str, str]] = None
    terrain_lines: Optional[list[str]] = None
    loadout: Optional[list[str]] = None
    waves: list[WaveSpec] = []
    inline = Catalog()

    for name, lineno, lines in _sections(text):
        if name == "level":
            if header is not None:
                raise SchemaError(f"line {lineno}: duplicate [level] section")
            header = _key_values(lines, name)
        elif name == "terrain":
            if terrain_lines is not None:
                raise SchemaError(f"line {lineno}: duplicate [terrain] section")
            terrain_lines = [line for _, line in lines]
        elif name == "loadout":
            if loadout is not None:
                raise SchemaError(f"line {lineno}: duplicate [loadout] section")
            loadout = [line for _, line in lines]
        elif name == "wave":
            waves.append(_parse_wave(lines, len(waves)))
        elif name == "unit":
            spec = _parse_unit(_key_values(lines, name))
            inline.units[spec.id] = spec
        elif name == "enemy":
            spec = _parse_enemy(_key_values(lines, name))
            inline.enemies[spec.id] = spec
        else:
            raise SchemaError(f"line {lineno}: unknown section [{name}]")

    if header is None:
        raise SchemaError("missing [level] section")
    if terrain_lines is None:
        raise SchemaError("missing [terrain] section")
    if loadout is None:
        raise SchemaError("missing [loadout] section")

    kv = dict(header)
    if "id" not in kv:
        raise SchemaError("[level] missing required key 'id'")
    level_id = kv.pop("id")
    description = kv.pop("description", "")
    rows = _int(kv, "rows", "level")
    params = {
        "starting_sun": _int(kv, "starting_sun", "level"),
        "passive_sun_period": _int(kv, "passive_sun_period", "level", 300),
        "passive_sun_yield": _int(kv, "passive_sun_yield", "level", 25),
        "max_ticks": _int(kv, "max_ticks", "level"),
        "spawn_spacing": _int(kv, "spawn_spacing", "level", 60),
        "spawn_jitter": _int(kv, "spawn_jitter", "level", 0),
        "difficulty": _int(kv, "difficulty", "level", 0),
    }
    if kv:
        raise SchemaError(f"[level] unknown keys {sorted(kv)}")

    terrain = []
    for i, line in enumerate(terrain_lines):
        try:
            terrain.append(tuple(_TERRAIN_CHARS[ch] for ch in line))
        except KeyError:
            raise SchemaError(f"terrain row {i}: characters must be from L, W, X") from None

    cat = base.merged(inline)
    units = []
    for i, uid in enumerate(loadout):
        if uid not in cat.units:
            raise UnknownUnit(f"loadout[{i}]: unit {uid!r} not in catalog")
        units.append(cat.units[uid])
    enemy_ids = sorted({e.enemy_id for w in waves for e in w.entries})
    for eid in enemy_ids:
        if eid not in cat.enemies:
            raise UnknownUnit(f"wave enemy {eid!r} not in catalog")

    level = LevelDef(
        id=level_id,
        rows=rows,
        terrain=tuple(terrain),
        loadout=tuple(loadout),
        waves=tuple(waves),
        units=tuple(units),
        enemies=tuple(cat.enemies[eid] for eid in enemy_ids),
        description=description,
        **params,
    )
    validate_level(level)
    return level


def _parse_wave(lines: list[tuple[int, str]], index: int) -> WaveSpec:
    path = f"wave[{index}]"
    start: Optional[int] = None
    entries = []
    for lineno, line in lines:
        if "=" in line:
            key, value = (s.strip() for s in line.split("=", 1))
            if key != "start_tick" or start is not None:
                raise SchemaError(f"line {lineno}: unexpected {key!r} in {path}")
            try:
                start = int(value)
            except ValueError:
                raise SchemaError(f"line {lineno}: start_tick is not an integer") from None
            continue
        parts = line.split()
        if len(parts) != 3:
            raise SchemaError(f"line {lineno}: expected 'enemy_id lane count' in {path}")
        eid, lane_text, count_text = parts
        try:
            lane = None if lane_text == "*" else int(lane_text)
            count = int(count_text)
        except ValueError:
            raise SchemaError(f"line {lineno}: lane and count must be integers") from None
        entries.append(WaveEntry(eid, lane, count))
    if start is None:
        raise SchemaError(f"{path}: missing start_tick")
    return WaveSpec(start, tuple(entries))


def validate_level(level: LevelDef) -> None:
    _check(bool(level.id) and not any(c.isspace() for c in level.id), "level.id", "must be a non-empty token")
    _check(1 <= level.rows <= MAX_ROWS, "level.rows", f"must be in 1..{MAX_ROWS}")
    _check(len(level.terrain) == level.rows, "terrain", f"expected {level.rows} rows")
    for i, row in enumerate(level.terrain):
        _check(len(row) == COLS, f"terrain[{i}]", f"expected {COLS} cells")
    _check(1 <= len(level.loadout) <= MAX_LOADOUT, "loadout", f"must hold 1..{MAX_LOADOUT} units")
    _check(len(set(level.loadout)) == len(level.loadout), "loadout", "duplicate unit ids")
    _check(tuple(u.id for u in level.units) == level.loadout, "units", "must match loadout")
    for i, unit in enumerate(level.units):
        unit.validate(f"units[{i}]")
    for enemy in level.enemies:
        enemy.validate(f"enemies[{enemy.id}]")
    known = {e.id for e in level.enemies}
    _check(len(level.waves) >= 1, "waves", "at least one wave required")
    prev = -1
    for i, wave in enumerate(level.waves):
        _check(wave.start_tick >= 0, f"wave[{i}].start_tick", "must be >= 0")
        _check(wave.start_tick >= prev, f"wave[{i}].start_tick", "waves must be ordered by start_tick")
        prev = wave.start_tick
        _check(len(wave.entries) >= 1, f"wave[{i}].entries", "at least one entry")
        for j, entry in enumerate(wave.entries):
            p = f"wave[{i}].entries[{j}]"
            if entry.enemy_id not in known:
                raise UnknownUnit(f"{p}: enemy {entry.enemy_id!r} not in catalog")
            _check(entry.lane is None or 0 <= entry.lane < level.rows, f"{p}.lane",
                   f"must be in 0..{level.rows - 1} or '*'")
            _check(entry.count >= 1, f"{p}.count", "must be >= 1")
    _check(level.starting_sun >= 0, "level.starting_sun", "must be >= 0")
    _check(level.passive_sun_period >= 0, "level.passive_sun_period", "must be >= 0")
    _check(level.passive_sun_yield >= 0, "level.passive_sun_yield", "must be >= 0")
    _check(level.max_ticks >= 1, "level.max_ticks", "must be >= 1")
    _check(level.spawn_spacing >= 0, "level.spawn_spacing", "must be >= 0")
    _check(level.spawn_jitter >= 0, "level.spawn_jitter", "must be >= 0")
    _check(0 <= level.difficulty <= MAX_DIFFICULTY, "level.difficulty", "out of range")


def serialize_level(level: LevelDef) -> str:
    """Inverse of :func:`parse_level` against the builtin catalog."""
    cat = builtin_catalog()
    out = ["[level]", f"id={level.id}"]
    if level.description:
        out.append(f"description={level.description}")
    out += [
        f"rows={level.rows}",
        f"starting_sun={level.starting_sun}",
        f"passive_sun_period={level.passive_sun_period}",
        f"passive_sun_yield={level.passive_sun_yield}",
        f"max_ticks={level.max_ticks}",
        f"spawn_spacing={level.spawn_spacing}",
        f"spawn_jitter={level.spawn_jitter}",
        f"difficulty={level.difficulty}",
        "",
        "[terrain]",
    ]
    out += ["".join(_TERRAIN_TO_CHAR[t] for t in row) for row in level.terrain]
    out += ["", "[loadout]", *level.loadout]
    for wave in level.waves:
        out += ["", "[wave]", f"start_tick={wave.start_tick}"]
        for e in wave.entries:
            out.append(f"{e.enemy_id} {'*' if e.lane is None else e.lane} {e.count}")
    for unit in level.units:
        if cat.units.get(unit.id) != unit:
            out += ["", *_unit_lines(unit)]
    for enemy in level.enemies:
        if cat.enemies.get(enemy.id) != enemy:
            out += ["", *_enemy_lines(enemy)]
    return "\n".join(out) + "\n"


def _unit_lines(u: UnitSpec) -> list[str]:
    lines = ["[unit]", f"id={u.id}", f"semantic_type={u.semantic_type.label}"]
    lines += [f"{k}={getattr(u, k)}" for k in _UNIT_INT_KEYS]
    return lines


def _enemy_lines(e: EnemySpec) -> list[str]:
    return ["[enemy]", f"id={e.id}"] + [f"{k}={getattr(e, k)}" for k in _ENEMY_INT_KEYS]


# --------------------------------------------------------------------------
# difficulty

def scaled_hp(base_hp: int, difficulty: int) -> int:
    return base_hp * (100_000 + difficulty) // 100_000


def scaled_count(count: int, difficulty: int) -> int:
    # ceil(count * (1 + 0.5 d / 1e5)) in exact integer arithmetic
    return -(-count * (200_000 + difficulty) // 200_000)


def apply_difficulty(level: LevelDef, difficulty: int) -> LevelDef:
    """Scale enemy hit points and spawn counts; layout and timings are kept.

    Only base levels (difficulty 0) can be scaled, so scaling never compounds.
    """
    _check_difficulty(difficulty)
    if difficulty == 0:
        return level
    if level.difficulty != 0:
        raise ValidationError("level.difficulty", "difficulty already applied")
    enemies = tuple(dataclasses.replace(e, base_hit_points=scaled_hp(e.base_hit_points, difficulty))
                    for e in level.enemies)
    waves = tuple(
        WaveSpec(w.start_tick, tuple(dataclasses.replace(e, count=scaled_count(e.count, difficulty))
                                     for e in w.entries))
        for w in level.waves
    )
    return dataclasses.replace(level, enemies=enemies, waves=waves, difficulty=difficulty)


# --------------------------------------------------------------------------
# bundled suite

def load_bundled(level_id: str) -> LevelDef:
    try:
        text = resources.files("towerbench.data.levels").joinpath(f"{level_id}.lvl").read_text("utf-8")
    except FileNotFoundError:
        raise UnknownUnit(f"no bundled level {level_id!r}") from None
    return parse_level(text)


@lru_cache(maxsize=1)
def _suite() -> tuple[LevelDef, ...]:
    return tuple(load_bundled(i) for i in SUITE_IDS)


def builtin_suite() -> list[LevelDef]:
    """The eight bundled synthetic levels, in id order."""
    return list(_suite())


def get_level(level_id: str) -> LevelDef:
    for level in _suite():
        if level.id == level_id:
            return level
    raise UnknownUnit(f"no bundled level {level_id!r}")


def resolve_levels(ids: Iterable[str]) -> list[LevelDef]:
    """Bundled ids or paths to level files (anything ending in ``.lvl``)."""
    out = []
    for item in ids:
        if item.endswith(".lvl"):
            with open(item, encoding="utf-8") as fh:
                out.append(parse_level(fh.read()))
        else:
            out.append(get_level(item))
    return out
