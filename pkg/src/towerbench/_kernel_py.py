"""Pure-Python tick kernel; the fallback when the compiled core is missing."""
from ._layout import *  # noqa: F403


def run_ticks(scal, slots, board, en, n):
    """Advance up to ``n`` ticks in place; stop early once the game ends.

    Returns the number of ticks executed.
    """
    s = scal.tolist()
    rows = s[ROWS]
    cap = s[N_ENEMIES]
    stype, syield, ssun = slots[S_TYPE].tolist(), slots[S_YIELD].tolist(), slots[S_SUNPERIOD].tolist()
    sdmg, speriod, srange = slots[S_DMG].tolist(), slots[S_PERIOD].tolist(), slots[S_RANGE].tolist()
    cd = slots[S_CD_LEFT].tolist()
    occ = board[B_OCC].tolist()
    php = board[B_HP].tolist()
    pnext = board[B_NEXT].tolist()
    e = en.tolist()
    status, lane, pos, ehp, natk = e[E_STATUS], e[E_LANE], e[E_POS], e[E_HP], e[E_NEXT_ATK]
    step, edmg, eperiod, spawn, pending = e[E_STEP], e[E_DMG], e[E_PERIOD], e[E_SPAWN], e[E_PENDING]
    nslots = s[N_SLOTS]
    pp, py = s[PASSIVE_PERIOD], s[PASSIVE_YIELD]

    ran = 0
    while ran < n and s[OUTCOME] == ONGOING:
        t = s[TICK]
        kills = 0
        adv = 0
        first = s[FIRST_LIVE]
        nxt_spawn = s[NEXT_SPAWN]

        # (1) passive sun
        if pp > 0 and t > 0 and t % pp == 0:
            s[SUN] += py
            s[SUN_EARNED] += py

        # (2) plant actions
        for r in range(rows):
            occ_r = occ[r]
            next_r = pnext[r]
            for c in range(9):
                k = occ_r[c]
                if k < 0 or next_r[c] > t:
                    continue
                typ = stype[k]
                if typ == T_SUN:
                    s[SUN] += syield[k]
                    s[SUN_EARNED] += syield[k]
                    next_r[c] = t + ssun[k]
                elif typ == T_RANGED or typ == T_MELEE:
                    reach = srange[k]
                    best = -1
                    best_pos = 1 << 62
                    for i in range(first, nxt_spawn):
                        if status[i] == ALIVE and lane[i] == r:
                            p = pos[i]
                            cell = p // POS_SCALE
                            if cell > LAST_CELL:
                                cell = LAST_CELL
                            if c <= cell <= c + reach and p < best_pos:
                                best = i
                                best_pos = p
                    if best >= 0:
                        pending[best] += sdmg[k]
                        next_r[c] = t + speriod[k]

        # (3) damage resolution
        for i in range(first, nxt_spawn):
            if status[i] == ALIVE and pending[i]:
                ehp[i] -= pending[i]
                pending[i] = 0
                if ehp[i] <= 0:
                    status[i] = DEAD
                    kills += 1
                    s[N_ALIVE] -= 1

        # (4) enemy movement and eating
        for i in range(first, nxt_spawn):
            if status[i] != ALIVE:
                continue
            ln = lane[i]
            p = pos[i]
            cell = p // POS_SCALE
            if cell > LAST_CELL:
                cell = LAST_CELL
            if occ[ln][cell] >= 0:
                if natk[i] <= t:
                    php[ln][cell] -= edmg[i]
                    natk[i] = t + eperiod[i]
                    if php[ln][cell] <= 0:
                        occ[ln][cell] = -1
                        php[ln][cell] = 0
                        pnext[ln][cell] = 0
            else:
                p -= step[i]
                if p <= 0:
                    pos[i] = 0
                    status[i] = GONE
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
                    pos[i] = p

        # (5) wave spawning
        while nxt_spawn < cap and spawn[nxt_spawn] <= t:
            status[nxt_spawn] = ALIVE
            pos[nxt_spawn] = SPAWN_POS
            nxt_spawn += 1
            s[N_SPAWNED] += 1
            s[N_ALIVE] += 1
        s[NEXT_SPAWN] = nxt_spawn
        while first < nxt_spawn and status[first] >= DEAD:
            first += 1
        s[FIRST_LIVE] = first

        # (6) cooldowns
        for k in range(nslots):
            if cd[k] > 0:
                cd[k] -= 1

        # (7) termination
        if s[OUTCOME] == ONGOING and s[N_SPAWNED] == cap and s[N_ALIVE] == 0:
            s[OUTCOME] = WON
        s[TICK] = t + 1
        s[KILLS_TOTAL] += kills
        s[KILLS_SINCE] += kills
        s[ADV_SINCE] += adv
        s[LAST_KILLS] = kills
        s[LAST_ADV] = adv
        ran += 1

    scal[:] = s
    slots[S_CD_LEFT] = cd
    board[B_OCC] = occ
    board[B_HP] = php
    board[B_NEXT] = pnext
    en[:] = e
    return ran
