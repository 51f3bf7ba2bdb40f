"""Compare tick throughput of the compiled and pure-Python kernels.

    python benchmarks/bench_kernel.py --ticks 20000 --repeats 3
"""
import argparse
import time

import numpy as np

from towerbench import kernel
from towerbench._layout import S_CD_LEFT
from towerbench.levels import SUITE_IDS, apply_difficulty, get_level
from towerbench.sim import new_game, place_unit


def busy_state(level_id, seed):
    """A game with a planted board so every tick phase does work."""
    state = new_game(apply_difficulty(get_level(level_id), 100_000), seed)
    state.sun = 100_000
    rng = np.random.default_rng(seed)
    n = len(state.level.units)
    for _ in range(200):
        try:
            place_unit(state, int(rng.integers(n)), int(rng.integers(state.rows)), int(rng.integers(9)))
        except Exception:
            pass
        state.slots[S_CD_LEFT, :] = 0
    return state


def time_backend(fn, state, ticks, chunk):
    arrays = [a.copy() for a in (state.scal, state.slots, state.board, state.en)]
    start = time.perf_counter()
    done = 0
    while done < ticks:
        ran = fn(*arrays, chunk)
        done += chunk
        if ran < chunk:  # episode over; restart from the same snapshot
            arrays = [a.copy() for a in (state.scal, state.slots, state.board, state.en)]
    return time.perf_counter() - start


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ticks", type=int, default=20_000)
    p.add_argument("--chunk", type=int, default=30, help="ticks per kernel call (one decision interval)")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--levels", default=",".join(SUITE_IDS))
    args = p.parse_args(argv)

    backends = kernel.backends()
    print(f"selected backend: {kernel.BACKEND}")
    if "cython" not in backends:
        print("compiled kernel not built; timing python only")
    print(f"{'level':>6} " + " ".join(f"{name + ' ticks/s':>18}" for name in backends) + "   speedup")
    for lid in args.levels.split(","):
        state = busy_state(lid, 0)
        rates = {}
        for name, fn in backends.items():
            best = min(time_backend(fn, state, args.ticks, args.chunk) for _ in range(args.repeats))
            rates[name] = args.ticks / best
        speed = rates.get("cython", float("nan")) / rates["python"]
        print(f"{lid:>6} " + " ".join(f"{rates[n]:18,.0f}" for n in backends) + f"   {speed:7.1f}x")


if __name__ == "__main__":
    main()
