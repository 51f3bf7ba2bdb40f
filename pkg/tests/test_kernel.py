import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerbench import _layout, kernel
from towerbench.levels import SUITE_IDS, apply_difficulty, get_level
from towerbench.sim import new_game, place_unit

BACKENDS = kernel.backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernel not built")


@needs_compiled
def test_layout_constants_agree():
    from towerbench import _kernel
    for name, value in _kernel.LAYOUT.items():
        assert getattr(_layout, name) == value, name


def _arrays(state):
    return [a.copy() for a in (state.scal, state.slots, state.board, state.en)]


@needs_compiled
@given(st.sampled_from(SUITE_IDS), st.integers(0, 2**31), st.sampled_from([0, 100_000, 200_000]))
@settings(max_examples=30, deadline=None)
def test_backends_bit_identical(level_id, seed, difficulty):
    rng = np.random.default_rng(seed)
    state = new_game(apply_difficulty(get_level(level_id), difficulty), seed)
    n = len(state.level.units)
    while state.scal[_layout.OUTCOME] == _layout.ONGOING and state.tick < 6000:
        for _ in range(2):
            try:
                place_unit(state, int(rng.integers(n)), int(rng.integers(state.rows)), int(rng.integers(9)))
            except Exception:
                pass
        chunk = int(rng.integers(1, 60))
        a, b = _arrays(state), _arrays(state)
        ran_a = BACKENDS["python"](*a, chunk)
        ran_b = BACKENDS["cython"](*b, chunk)
        assert ran_a == ran_b
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        state.scal[:], state.slots[:], state.board[:], state.en[:] = a


def test_pure_override_selects_python():
    env = dict(os.environ, TOWERBENCH_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import towerbench; print(towerbench.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_reported():
    assert kernel.BACKEND in BACKENDS
