import numpy as np
import pytest

from towerbench.levels import builtin_suite, parse_level


def level_text(rows=1, terrain=None, loadout=("sunflower",), waves=(("900", ["zombie 0 1"]),),
               starting_sun=50, max_ticks=9000, extra="", sections=""):
    terrain = terrain or ["L" * 9] * rows
    out = ["[level]", "id=T", f"rows={rows}", f"starting_sun={starting_sun}", f"max_ticks={max_ticks}"]
    if extra:
        out.append(extra)
    out += ["[terrain]", *terrain, "[loadout]", *loadout]
    for start, entries in waves:
        out += ["[wave]", f"start_tick={start}", *entries]
    return "\n".join(out) + "\n" + sections


def make_level(**kw):
    return parse_level(level_text(**kw))


@pytest.fixture(scope="session")
def suite():
    return builtin_suite()


def random_reachable_states(levels, n, seed=0, difficulty=100_000, max_decisions=60):
    """Yield (env, step) pairs from random-agent play, spread over levels."""
    from towerbench.env import TowerEnv

    rng = np.random.default_rng(seed)
    env = TowerEnv()
    produced = 0
    while produced < n:
        level = levels[int(rng.integers(len(levels)))]
        step = env.reset(level, difficulty, int(rng.integers(1 << 30)))
        horizon = int(rng.integers(1, max_decisions))
        for _ in range(horizon):
            yield env, step
            produced += 1
            if step.terminal or produced >= n:
                break
            allowed = np.flatnonzero(step.mask)
            step = env.step(int(allowed[rng.integers(len(allowed))]))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
