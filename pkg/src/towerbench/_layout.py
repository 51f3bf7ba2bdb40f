"""Index constants for the packed integer game state.

The tick kernels (compiled and pure Python) operate on four int64 arrays:
``scal`` (scalars), ``slots`` (per loadout slot, shape (NSF, 6)),
``board`` (shape (NBF, rows, 9)) and ``en`` (per spawned enemy, shape
(NEF, total_spawns)). ``_kernel.pyx`` mirrors these values; the test suite
checks that both agree.
"""

# scal
TICK = 0
SUN = 1
SUN_EARNED = 2
SUN_SPENT = 3
KILLS_TOTAL = 4
KILLS_SINCE = 5
ADV_SINCE = 6
CROSSED = 7
OUTCOME = 8
N_SPAWNED = 9
N_ALIVE = 10
PASSIVE_PERIOD = 11
PASSIVE_YIELD = 12
ROWS = 13
N_ENEMIES = 14
LAST_KILLS = 15
LAST_ADV = 16
N_SLOTS = 17
NEXT_SPAWN = 18
FIRST_LIVE = 19
NSCAL = 20

# slots
S_TYPE = 0
S_COST = 1
S_COOLDOWN = 2
S_HP = 3
S_DMG = 4
S_PERIOD = 5
S_RANGE = 6
S_YIELD = 7
S_SUNPERIOD = 8
S_CD_LEFT = 9
NSF = 10
MAX_SLOTS = 6

# board
B_TERRAIN = 0
B_PLATFORM = 1
B_OCC = 2
B_HP = 3
B_NEXT = 4
NBF = 5

# en
E_STATUS = 0
E_LANE = 1
E_POS = 2
E_HP = 3
E_NEXT_ATK = 4
E_STEP = 5
E_DMG = 6
E_PERIOD = 7
E_SPAWN = 8
E_PENDING = 9
E_KIND = 10
NEF = 11

# enemy status
PENDING = 0
ALIVE = 1
DEAD = 2
GONE = 3  # crossed the home line

# outcome
ONGOING = 0
WON = 1
LOST = 2

# semantic type codes, as in levels.SemanticType
T_SUN = 0
T_RANGED = 1
T_MELEE = 2
T_DEFENSE = 3
T_PREPARE = 4
T_INSTANT = 5

POS_SCALE = 1000  # positions are thousandths of a cell
SPAWN_POS = 9000
LAST_CELL = 8
