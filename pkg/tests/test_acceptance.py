"""End-to-end acceptance checks; each test records one PASS/FAIL line."""
import hashlib
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from towerbench import _layout as L
from towerbench.agents import HaiAgent, HrlAgent, RandomAgent
from towerbench.env import (OBS_CLOSEST, OBS_COUNT, OBS_HP, OBS_PAST_MID, OBS_PLANTED, OBS_SIZE, OBS_SUN,
                            TowerEnv, encode_observation)
from towerbench.errors import MaskedActionError
from towerbench.harness import (DEFAULT_DIFFICULTIES, difficulty_sweep, evaluate, generalization_experiment,
                                sweep_lookup, train_per_level)
from towerbench.ppo import TrainConfig, build_actor, build_critic, gae, ppo_loss, train
from towerbench.sim import snapshot_metrics
from towerbench.strategies import StrategyKind, execute, hai_priorities, plan

from conftest import random_reachable_states
from test_ppo import _batch, gae_oracle

RESULTS: list[str] = []
SWEEP_LEVELS = ("S02", "S06")


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# --- 1. observation contract -----------------------------------------------------------------

def test_01_observation_contract(suite):
    start = time.perf_counter()
    checked = 0
    for env, step in random_reachable_states(suite, 10_000, seed=101):
        s = env.state
        obs = encode_observation(s)
        assert obs.shape == (OBS_SIZE,)
        units = s.level.units
        onehot = obs[:36].reshape(6, 6)
        for k in range(6):
            expect = np.zeros(6)
            if k < len(units):
                expect[int(units[k].semantic_type)] = 1.0
            assert np.array_equal(onehot[k], expect)
            if k < len(units):
                total, left = s.slots[L.S_COOLDOWN, k], s.slots[L.S_CD_LEFT, k]
                assert obs[36 + k] == (left / total if total else 0.0)
            else:
                assert obs[36 + k] == 0.0
        assert obs[OBS_SUN] == s.sun / 1000
        m = snapshot_metrics(s)
        r = s.rows
        for block, values, pad in ((OBS_HP, m.mean_hp / 1000, 0.0), (OBS_CLOSEST, m.closest, 1.0),
                                   (OBS_PAST_MID, m.past_mid, 0.0), (OBS_COUNT, m.count, 0.0)):
            lanes = obs[block]
            assert np.array_equal(lanes[:r], values) and (lanes[r:] == pad).all()
        planted = obs[OBS_PLANTED].reshape(5, 5)
        assert np.array_equal(planted[:r], m.planted) and not planted[r:].any()
        assert np.array_equal(step.observation, obs)
        checked += 1
    elapsed = time.perf_counter() - start
    record(1, checked == 10_000 and elapsed < 10, f"{checked} states, width 88, layout verified in {elapsed:.1f}s")


# --- 2. mask soundness -----------------------------------------------------------------------

def test_02_mask_soundness(suite):
    rejected = executed = 0
    for env, step in random_reachable_states(suite, 10_000, seed=202):
        if step.terminal:
            continue
        s = env.state
        for k in StrategyKind:
            p = plan(k, s)
            assert bool(step.mask[k]) == (p is not None)
            if p is not None:
                assert execute(k, s.copy()) is True
                executed += 1
            else:
                before = s.fingerprint()
                with pytest.raises(MaskedActionError):
                    env.step(int(k))
                assert s.fingerprint() == before
                rejected += 1
        assert step.mask[4]
    record(2, True, f"mask agrees with plans; {executed} executions ok, {rejected} masked actions rejected")


# --- 3. reward ledger ------------------------------------------------------------------------

def _ledger_terms(state):
    """Kills and cell advances recounted from the final enemy table."""
    en = state.en
    kills = advances = 0
    for i in range(en.shape[1]):
        status = en[L.E_STATUS, i]
        if status == L.PENDING:
            continue
        if status == L.GONE:
            advances += 9
            continue
        kills += status == L.DEAD
        advances += 8 - min(int(en[L.E_POS, i]) // 1000, 8)
    return kills, advances


def test_03_reward_ledger(suite):
    env = TowerEnv()
    worst = 0.0
    for ep in range(1000):
        level = suite[ep % len(suite)]
        agent = RandomAgent(7)
        agent.begin_episode(ep)
        step = env.reset(level, 100_000, ep)
        total = step.reward_prev
        while not step.terminal:
            step = env.step(agent.act(step, env))
            total += step.reward_prev
        kills, adv = _ledger_terms(env.state)
        expect = 1.2 * kills - adv / 200 + (1.0 if env.won else -5.0)
        worst = max(worst, abs(total - expect))
    record(3, worst < 1e-9, f"1000 random episodes, worst |error| {worst:.2e}")


# --- 4. determinism --------------------------------------------------------------------------

REPLAY = """
import hashlib, json, sys
from towerbench.env import TowerEnv
from towerbench.levels import get_level
level, difficulty, seed, actions = json.loads(sys.argv[1])
env = TowerEnv(trace=True)
env.reset(get_level(level), difficulty, seed)
for a in actions:
    env.step(a)
print(hashlib.sha256(json.dumps(env.trace, sort_keys=True).encode()).hexdigest())
"""


def _replay_hash(level, difficulty, seed, actions):
    env = TowerEnv(trace=True)
    env.reset(level, difficulty, seed)
    for a in actions:
        env.step(a)
    return hashlib.sha256(json.dumps(env.trace, sort_keys=True).encode()).hexdigest()


def test_04_determinism(suite):
    start = time.perf_counter()
    cases = 0
    for level, difficulty, seed in ((suite[1], 100_000, 3), (suite[4], 0, 11), (suite[7], 200_000, 5)):
        env = TowerEnv()
        step = env.reset(level, difficulty, seed)
        rng = np.random.default_rng(seed)
        actions = []
        while not step.terminal:
            actions.append(int(rng.choice(np.flatnonzero(step.mask))))
            step = env.step(actions[-1])
        first = _replay_hash(level, difficulty, seed, actions)
        assert _replay_hash(level, difficulty, seed, actions) == first
        args = json.dumps([level.id, difficulty, seed, actions])
        for _ in range(2):
            out = subprocess.run([sys.executable, "-c", REPLAY, args], capture_output=True, text=True, check=True)
            assert out.stdout.strip() == first
        cases += 1
    cfg = TrainConfig(total_episodes=200, curve_interval=10)
    a = train([suite[1]], cfg, seed=9)
    b = train([suite[1]], cfg, seed=9)
    same_curve = a.curve == b.curve and len(a.curve) == 20
    same_params = all(np.array_equal(p, q) for p, q in zip(a.actor.params + a.critic.params,
                                                           b.actor.params + b.critic.params))
    elapsed = time.perf_counter() - start
    record(4, same_curve and same_params and elapsed < 120,
           f"{cases} replayed traces identical across 4 runs, 200-episode curve identical, {elapsed:.1f}s")


# --- 5. gradient check -----------------------------------------------------------------------

def test_05_gradient_check():
    start = time.perf_counter()
    rng = np.random.default_rng(55)
    actor, critic = build_actor(16, rng), build_critic(16, rng)
    for p in actor.params:
        p += rng.normal(scale=0.2, size=p.shape)
    batch = _batch(rng, n=8)
    cfg = TrainConfig()
    _, _, ga, gc = ppo_loss(actor, critic, batch, cfg)
    h = 1e-5
    worst, count = 0.0, 0
    for net, grads in ((actor, ga), (critic, gc)):
        for p, g in zip(net.params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                up = ppo_loss(actor, critic, batch, cfg, need_grads=False)[0]
                flat[i] = old - h
                down = ppo_loss(actor, critic, batch, cfg, need_grads=False)[0]
                flat[i] = old
                num = (up - down) / (2 * h)
                worst = max(worst, abs(num - gflat[i]) / max(abs(num), abs(gflat[i]), 1e-6))
                count += 1
    elapsed = time.perf_counter() - start
    record(5, worst < 1e-4 and elapsed < 30,
           f"{count} parameters, worst relative error {worst:.2e}, {elapsed:.1f}s")


# --- 6. GAE oracle ---------------------------------------------------------------------------

def test_06_gae_oracle():
    rng = np.random.default_rng(66)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 33))
        r, v = rng.normal(size=n), rng.normal(size=n)
        term = rng.random(n) < 0.15
        term[-1] = True
        gamma, lam = rng.uniform(0.5, 1.0), rng.uniform(0.0, 1.0)
        adv, _ = gae(r, v, term, gamma, lam)
        worst = max(worst, float(np.max(np.abs(adv - np.array(gae_oracle(r, v, term, gamma, lam))))))
    record(6, worst <= 1e-12, f"100 sequences, worst deviation {worst:.1e}")


# --- 7. HAI level independence ---------------------------------------------------------------

def test_07_hai_level_independence(suite):
    checked = 0
    for env, _ in random_reachable_states(suite, 1000, seed=707):
        s = env.state
        twin = s.copy()
        twin.level = s.level.with_id("renamed-" + s.level.id[::-1])
        assert twin.level.id != s.level.id
        assert hai_priorities(twin) == hai_priorities(s)
        checked += 1
    record(7, checked == 1000, f"{checked} states, priority vectors exactly equal")


# --- 8-10. experiments on the bundled suite ---------------------------------------------------

EPISODES, SEEDS = 100, 5


@pytest.fixture(scope="session")
def experiments(suite):
    start = time.perf_counter()
    cfg = TrainConfig(total_episodes=2000, hidden=64, difficulty=100_000)
    models = train_per_level(suite, cfg, seed=0)
    hrl = {lvl.id: evaluate(HrlAgent(models[lvl.id].actor), [lvl], cfg.difficulty, EPISODES, SEEDS,
                            agent_name="hrl").rows[0].success_mean for lvl in suite}
    hai = {r.level: r.success_mean for r in evaluate(HaiAgent(), suite, cfg.difficulty, EPISODES, SEEDS).level_rows}
    rnd = {r.level: r.success_mean
           for r in evaluate(RandomAgent(0), suite, cfg.difficulty, EPISODES, SEEDS).level_rows}
    return {"config": cfg, "models": models, "hrl": hrl, "hai": hai, "random": rnd,
            "seconds": time.perf_counter() - start}


def test_08_per_level_training_beats_baselines(experiments, suite):
    means = {k: float(np.mean(list(experiments[k].values()))) for k in ("hrl", "hai", "random")}
    for lvl in suite:
        print(f"  {lvl.id}: hrl {experiments['hrl'][lvl.id]:6.2f}  hai {experiments['hai'][lvl.id]:6.2f}  "
              f"random {experiments['random'][lvl.id]:6.2f}")
    ok = (means["hrl"] >= means["hai"] + 5 and means["hai"] >= means["random"] - 5
          and experiments["seconds"] < 3 * 3600)
    record(8, ok, f"mean success hrl {means['hrl']:.2f} / hai {means['hai']:.2f} / random {means['random']:.2f}, "
                  f"{experiments['seconds'] / 60:.1f} min")


def test_09_difficulty_sweep(experiments, suite):
    by_id = {lvl.id: lvl for lvl in suite}
    failures, details = [], []
    for lid in SWEEP_LEVELS:
        agents = {"hrl": HrlAgent(experiments["models"][lid].actor), "hai": HaiAgent(), "random": RandomAgent(0)}
        table = sweep_lookup(difficulty_sweep(agents, by_id[lid], DEFAULT_DIFFICULTIES, EPISODES, SEEDS))
        for name, curve in table.items():
            print(f"  {lid} {name:>6}: " + " ".join(f"{curve[d]:6.2f}" for d in DEFAULT_DIFFICULTIES))
            if curve[200_000] > curve[0]:
                failures.append(f"{lid}/{name} harder is easier")
        for d in DEFAULT_DIFFICULTIES:
            if table["hrl"][d] < table["hai"][d] - 5:
                failures.append(f"{lid} d={d} hrl {table['hrl'][d]:.1f} < hai {table['hai'][d]:.1f} - 5")
        details.append(f"{lid} hrl {table['hrl'][0]:.0f}->{table['hrl'][200_000]:.0f}")
    record(9, not failures, "; ".join(failures or details))


def test_10_subset_training_does_not_win(experiments, suite):
    per_level_mean = float(np.mean(list(experiments["hrl"].values())))
    outcome = []
    ok = True
    for n in (2, 4):
        rep = generalization_experiment(n, experiments["config"], seeds=3, suite=suite,
                                        per_level=experiments["hrl"], hai=experiments["hai"],
                                        episodes=EPISODES, eval_seeds=SEEDS)
        subset_mean = rep.means()[2]
        print(f"  N={n} subsets {rep.subsets}: " + " ".join(f"{rep.subset[i]:.0f}" for i in rep.levels))
        ok &= subset_mean <= per_level_mean + 2
        outcome.append(f"N={n} {subset_mean:.2f}")
    record(10, ok, f"per-level {per_level_mean:.2f} vs " + ", ".join(outcome))
