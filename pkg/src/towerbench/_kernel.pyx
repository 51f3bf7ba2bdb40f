# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tick kernel. Must stay step-for-step identical to _kernel_py."""

cdef enum:
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

cdef enum:
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

cdef enum:
    B_TERRAIN = 0
    B_PLATFORM = 1
    B_OCC = 2
    B_HP = 3
    B_NEXT = 4

cdef enum:
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

cdef enum:
    ALIVE = 1
    DEAD = 2
    GONE = 3
    ONGOING = 0
    WON = 1
    LOST = 2
    T_SUN = 0
    T_RANGED = 1
    T_MELEE = 2
    POS_SCALE = 1000
    SPAWN_POS = 9000
    LAST_CELL = 8

ctypedef long long i64

LAYOUT = {
    "TICK": TICK, "SUN": SUN, "OUTCOME": OUTCOME, "FIRST_LIVE": FIRST_LIVE,
    "S_CD_LEFT": S_CD_LEFT, "B_NEXT": B_NEXT, "E_KIND": E_KIND, "E_PENDING": E_PENDING,
    "SPAWN_POS": SPAWN_POS, "LAST_CELL": LAST_CELL,
}


def run_ticks(i64[::1] s, i64[:, ::1] slots, i64[:, :, ::1] board, i64[:, ::1] en, i64 n):
    """Advance up to ``n`` ticks in place; stop early once the game ends."""
    cdef i64 rows = s[ROWS], cap = s[N_ENEMIES], nslots = s[N_SLOTS]
    cdef i64 pp = s[PASSIVE_PERIOD], py = s[PASSIVE_YIELD]
    cdef i64 ran = 0, t, kills, adv, first, nxt_spawn
    cdef i64 r, c, k, typ, reach, best, best_pos, i, p, cell, nc, ln
    with nogil:
        while ran < n and s[OUTCOME] == ONGOING:
            t = s[TICK]
            kills = 0
            adv = 0
            first = s[FIRST_LIVE]
            nxt_spawn = s[NEXT_SPAWN]

            if pp > 0 and t > 0 and t % pp == 0:
                s[SUN] += py
                s[SUN_EARNED] += py

            for r in range(rows):
                for c in range(9):
                    k = board[B_OCC, r, c]
                    if k < 0 or board[B_NEXT, r, c] > t:
                        continue
                    typ = slots[S_TYPE, k]
                    if typ == T_SUN:
                        s[SUN] += slots[S_YIELD, k]
                        s[SUN_EARNED] += slots[S_YIELD, k]
                        board[B_NEXT, r, c] = t + slots[S_SUNPERIOD, k]
                    elif typ == T_RANGED or typ == T_MELEE:
                        reach = slots[S_RANGE, k]
                        best = -1
                        best_pos = (<i64>1) << 62
                        for i in range(first, nxt_spawn):
                            if en[E_STATUS, i] == ALIVE and en[E_LANE, i] == r:
                                p = en[E_POS, i]
                                cell = p // POS_SCALE
                                if cell > LAST_CELL:
                                    cell = LAST_CELL
                                if c <= cell and cell <= c + reach and p < best_pos:
                                    best = i
                                    best_pos = p
                        if best >= 0:
                            en[E_PENDING, best] += slots[S_DMG, k]
                            board[B_NEXT, r, c] = t + slots[S_PERIOD, k]

            for i in range(first, nxt_spawn):
                if en[E_STATUS, i] == ALIVE and en[E_PENDING, i] != 0:
                    en[E_HP, i] -= en[E_PENDING, i]
                    en[E_PENDING, i] = 0
                    if en[E_HP, i] <= 0:
                        en[E_STATUS, i] = DEAD
                        kills += 1
                        s[N_ALIVE] -= 1

            for i in range(first, nxt_spawn):
                if en[E_STATUS, i] != ALIVE:
                    continue
                ln = en[E_LANE, i]
                p = en[E_POS, i]
                cell = p // POS_SCALE
                if cell > LAST_CELL:
                    cell = LAST_CELL
                if board[B_OCC, ln, cell] >= 0:
                    if en[E_NEXT_ATK, i] <= t:
                        board[B_HP, ln, cell] -= en[E_DMG, i]
                        en[E_NEXT_ATK, i] = t + en[E_PERIOD, i]
                        if board[B_HP, ln, cell] <= 0:
                            board[B_OCC, ln, cell] = -1
                            board[B_HP, ln, cell] = 0
                            board[B_NEXT, ln, cell] = 0
                else:
                    p -= en[E_STEP, i]
                    if p <= 0:
                        en[E_POS, i] = 0
                        en[E_STATUS, i] = GONE
                        s[N_ALIVE] -= 1
                        s[CROSSED] += 1
                        adv += 1
                        s[OUTCOME] = LOST
                    else:
                        nc = p // POS_SCALE
                        if nc > LAST_CELL:
                            nc = LAST_CELL
                        if nc < cell:
                            adv += 1
                        en[E_POS, i] = p

            while nxt_spawn < cap and en[E_SPAWN, nxt_spawn] <= t:
                en[E_STATUS, nxt_spawn] = ALIVE
                en[E_POS, nxt_spawn] = SPAWN_POS
                nxt_spawn += 1
                s[N_SPAWNED] += 1
                s[N_ALIVE] += 1
            s[NEXT_SPAWN] = nxt_spawn
            while first < nxt_spawn and en[E_STATUS, first] >= DEAD:
                first += 1
            s[FIRST_LIVE] = first

            for k in range(nslots):
                if slots[S_CD_LEFT, k] > 0:
                    slots[S_CD_LEFT, k] -= 1

            if s[OUTCOME] == ONGOING and s[N_SPAWNED] == cap and s[N_ALIVE] == 0:
                s[OUTCOME] = WON
            s[TICK] = t + 1
            s[KILLS_TOTAL] += kills
            s[KILLS_SINCE] += kills
            s[ADV_SINCE] += adv
            s[LAST_KILLS] = kills
            s[LAST_ADV] = adv
            ran += 1
    return ran
