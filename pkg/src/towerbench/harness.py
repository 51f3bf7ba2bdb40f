"""Evaluation protocol, experiment families and CSV report emission."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .agents import Agent, EpisodeRecord, HaiAgent, HrlAgent, run_episode
from .env import TowerEnv
from .levels import MAX_DIFFICULTY, LevelDef, builtin_suite
from .ppo import TrainConfig, TrainResult, train
from .strategies import N_ACTIONS

DEFAULT_DIFFICULTIES = (0, 50_000, 100_000, 150_000, 200_000)
TOTAL_LABEL = "Total"

REPORT_COLUMNS = ["agent", "difficulty", "level", "success_mean", "success_std",
                  "reward_mean", "reward_std", "steps_mean", "steps_std"]


# -----------------------------------------------------------------------------
# workers and seeds

def worker_count(requested: Optional[int] = None) -> int:
    """Worker processes to use: TOWERBENCH_THREADS caps the request and CPU count."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("TOWERBENCH_THREADS")
    if cap:
        try:
            cap_n = int(cap)
        except ValueError:
            cap_n = 0
        if cap_n < 1:
            raise ValueError(f"TOWERBENCH_THREADS must be a positive integer, got {cap!r}")
        n = min(n, cap_n)
    return max(1, n)


def episode_seed(master: int, batch: int, episode: int) -> int:
    """Seed of one evaluation episode, independent of execution order."""
    return int(np.random.SeedSequence([master, batch, episode]).generate_state(1)[0])


def _map(fn: Callable, jobs: list, workers: Optional[int]) -> list:
    n = min(worker_count(workers), len(jobs))
    if n <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _run_batch(agent: Agent, level: LevelDef, difficulty: int, seeds: list[int]) -> list[EpisodeRecord]:
    env = TowerEnv()
    return [run_episode(agent, level, difficulty, s, env) for s in seeds]


# -----------------------------------------------------------------------------
# reports

@dataclass
class ReportRow:
    level: str
    success_mean: float
    success_std: float
    reward_mean: float
    reward_std: float
    steps_mean: float
    steps_std: float


@dataclass
class EvalReport:
    agent: str
    difficulty: int
    rows: list[ReportRow] = field(default_factory=list)  # last row is the total when present
    records: list[EpisodeRecord] = field(default_factory=list, compare=False, repr=False)
    histogram: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS), compare=False, repr=False)

    def row(self, level: str) -> ReportRow:
        for r in self.rows:
            if r.level == level:
                return r
        raise KeyError(level)

    @property
    def total(self) -> Optional[ReportRow]:
        return self.rows[-1] if self.rows and self.rows[-1].level == TOTAL_LABEL else None

    @property
    def level_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.level != TOTAL_LABEL]


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


def action_histogram(records: Iterable[EpisodeRecord]) -> np.ndarray:
    """Normalized action frequencies; all zeros when no action was taken."""
    counts = np.zeros(N_ACTIONS, dtype=np.float64)
    for rec in records:
        counts += rec.actions
    total = counts.sum()
    return counts / total if total > 0 else counts


def aggregate(records: Sequence[EpisodeRecord], level_ids: Sequence[str], seeds: int, episodes: int,
              agent: str = "agent", difficulty: int = 0) -> EvalReport:
    """Per-level rows plus the total row from raw records.

    Records are ordered level-major, then seed batch, then episode. Per seed
    batch: success is a percentage; the total row averages success and sums
    rewards and steps over levels, then takes mean and std across batches.
    """
    n_levels = len(level_ids)
    if len(records) != n_levels * seeds * episodes:
        raise ValueError("record count does not match levels x seeds x episodes")
    shape = (n_levels, seeds, episodes)
    won = np.array([r.won for r in records], dtype=np.float64).reshape(shape)
    reward = np.array([r.reward for r in records], dtype=np.float64).reshape(shape)
    steps = np.array([r.steps for r in records], dtype=np.float64).reshape(shape)
    succ = 100.0 * won.mean(axis=2)
    rew = reward.mean(axis=2)
    stp = steps.mean(axis=2)
    rows = []
    for i, lid in enumerate(level_ids):
        rows.append(ReportRow(lid, *_mean_std(succ[i]), *_mean_std(rew[i]), *_mean_std(stp[i])))
    if n_levels:
        rows.append(ReportRow(TOTAL_LABEL, *_mean_std(succ.mean(axis=0)), *_mean_std(rew.sum(axis=0)),
                              *_mean_std(stp.sum(axis=0))))
    return EvalReport(agent, difficulty, rows, list(records), action_histogram(records))


def evaluate(agent: Agent, levels: Sequence[LevelDef], difficulty: int = 100_000, episodes: int = 100,
             seeds: int = 5, master_seed: int = 0, workers: Optional[int] = None,
             agent_name: Optional[str] = None) -> EvalReport:
    """S seed batches of E episodes on every level."""
    if episodes < 1 or seeds < 1:
        raise ValueError("episodes and seeds must be >= 1")
    jobs = [(agent, lvl, difficulty, [episode_seed(master_seed, s, e) for e in range(episodes)])
            for lvl in levels for s in range(seeds)]
    records = [r for batch in _map(_run_batch, jobs, workers) for r in batch]
    return aggregate(records, [lvl.id for lvl in levels], seeds, episodes,
                     agent_name or agent.name, difficulty)


@dataclass
class SweepRow:
    agent: str
    difficulty: int
    success_mean: float
    success_std: float


def difficulty_sweep(agents: dict[str, Agent], level: LevelDef,
                     difficulties: Sequence[int] = DEFAULT_DIFFICULTIES, episodes: int = 100,
                     seeds: int = 5, master_seed: int = 0, workers: Optional[int] = None) -> list[SweepRow]:
    """Success rate per (agent, difficulty) on one level."""
    for d in difficulties:
        if not 0 <= d <= MAX_DIFFICULTY:
            raise ValueError(f"difficulty {d} outside 0..{MAX_DIFFICULTY}")
    rows = []
    for name, agent in agents.items():
        for d in difficulties:
            rep = evaluate(agent, [level], d, episodes, seeds, master_seed, workers, name)
            r = rep.rows[0]
            rows.append(SweepRow(name, int(d), r.success_mean, r.success_std))
    return rows


def sweep_lookup(rows: Sequence[SweepRow]) -> dict[str, dict[int, float]]:
    out: dict[str, dict[int, float]] = {}
    for r in rows:
        out.setdefault(r.agent, {})[r.difficulty] = r.success_mean
    return out


# -----------------------------------------------------------------------------
# training helpers

def _train_job(level_ids: tuple, levels: tuple, config: TrainConfig, seed: int) -> TrainResult:
    return train(list(levels), config, seed)


def train_per_level(levels: Sequence[LevelDef], config: TrainConfig, seed: int = 0,
                    workers: Optional[int] = None) -> dict[str, TrainResult]:
    """One model per level; level i uses training seed ``seed + i``."""
    jobs = [((lvl.id,), (lvl,), config, seed + i) for i, lvl in enumerate(levels)]
    results = _map(_train_job, jobs, workers)
    return {lvl.id: res for lvl, res in zip(levels, results)}


@dataclass
class GeneralizationReport:
    n: int
    subsets: list[list[str]]
    per_level: dict[str, float]  # success % of the per-level model on its own level
    hai: dict[str, float]
    subset: dict[str, float]  # success % of subset-trained models, mean over training seeds
    subset_by_seed: list[dict[str, float]] = field(default_factory=list)

    @property
    def levels(self) -> list[str]:
        return list(self.per_level)

    def means(self) -> tuple[float, float, float]:
        ids = self.levels
        return (float(np.mean([self.per_level[i] for i in ids])),
                float(np.mean([self.hai[i] for i in ids])),
                float(np.mean([self.subset[i] for i in ids])))


def generalization_experiment(n: int, config: TrainConfig = TrainConfig(), seeds: int = 3,
                              suite: Optional[Sequence[LevelDef]] = None,
                              per_level: Optional[dict[str, float]] = None,
                              hai: Optional[dict[str, float]] = None,
                              episodes: int = 100, eval_seeds: int = 5, master_seed: int = 0,
                              workers: Optional[int] = None) -> GeneralizationReport:
    """Train on N randomly drawn levels per seed and evaluate on the whole suite.

    ``per_level`` and ``hai`` (success % per level id) may be passed in to
    reuse earlier runs; otherwise they are computed here.
    """
    suite = list(suite or builtin_suite())
    if not 1 <= n < len(suite):
        raise ValueError(f"subset size must be in 1..{len(suite) - 1}, got {n}")
    difficulty = config.difficulty
    if per_level is None:
        models = train_per_level(suite, config, master_seed, workers)
        per_level = {}
        for lvl in suite:
            rep = evaluate(HrlAgent(models[lvl.id].actor), [lvl], difficulty, episodes, eval_seeds,
                           master_seed, workers)
            per_level[lvl.id] = rep.rows[0].success_mean
    if hai is None:
        rep = evaluate(HaiAgent(), suite, difficulty, episodes, eval_seeds, master_seed, workers)
        hai = {r.level: r.success_mean for r in rep.level_rows}

    rng = np.random.default_rng([master_seed, n])
    subsets = [sorted(rng.choice(len(suite), size=n, replace=False).tolist()) for _ in range(seeds)]
    jobs = [(tuple(suite[i].id for i in sub), tuple(suite[i] for i in sub), config, 1000 * n + s)
            for s, sub in enumerate(subsets)]
    results = _map(_train_job, jobs, workers)
    by_seed = []
    for res in results:
        rep = evaluate(HrlAgent(res.actor), suite, difficulty, episodes, eval_seeds, master_seed, workers)
        by_seed.append({r.level: r.success_mean for r in rep.level_rows})
    subset = {lvl.id: float(np.mean([d[lvl.id] for d in by_seed])) for lvl in suite}
    return GeneralizationReport(n, [[suite[i].id for i in sub] for sub in subsets],
                                {lvl.id: per_level[lvl.id] for lvl in suite},
                                {lvl.id: hai[lvl.id] for lvl in suite}, subset, by_seed)


# -----------------------------------------------------------------------------
# CSV output

def _writer(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_report(reports, path) -> None:
    """One CSV row per (agent, level); totals rows are labelled ``Total``."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    fh, w = _writer(path)
    with fh:
        w.writerow(REPORT_COLUMNS)
        for rep in reports:
            for r in rep.rows:
                w.writerow([rep.agent, rep.difficulty, r.level, repr(r.success_mean), repr(r.success_std),
                            repr(r.reward_mean), repr(r.reward_std), repr(r.steps_mean), repr(r.steps_std)])


def read_report(path) -> list[EvalReport]:
    with open(path, encoding="utf-8", newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        reports: list[EvalReport] = []
        for row in rd:
            agent, diff, level, *nums = row
            if not reports or reports[-1].agent != agent or reports[-1].difficulty != int(diff):
                reports.append(EvalReport(agent, int(diff)))
            reports[-1].rows.append(ReportRow(level, *map(float, nums)))
    return reports


def write_curve(curve, path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["episodes", "success_rate"])
        for ep, rate in curve:
            w.writerow([int(ep), repr(float(rate))])


def write_histogram(reports, path) -> None:
    if isinstance(reports, EvalReport):
        reports = [reports]
    fh, w = _writer(path)
    with fh:
        w.writerow(["agent", "action", "frequency"])
        for rep in reports:
            for a, f in enumerate(rep.histogram):
                w.writerow([rep.agent, a, repr(float(f))])


def write_sweep(rows: Sequence[SweepRow], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["agent", "difficulty", "success_mean", "success_std"])
        for r in rows:
            w.writerow([r.agent, r.difficulty, repr(r.success_mean), repr(r.success_std)])


def write_generalization(rep: GeneralizationReport, path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["level", "hrl_per_level", "hai", f"hrl_subset_n{rep.n}"])
        for lid in rep.levels:
            w.writerow([lid, repr(rep.per_level[lid]), repr(rep.hai[lid]), repr(rep.subset[lid])])
        w.writerow([TOTAL_LABEL, *(repr(m) for m in rep.means())])


__all__ = [
    "DEFAULT_DIFFICULTIES", "EvalReport", "GeneralizationReport", "ReportRow", "SweepRow",
    "action_histogram", "aggregate", "difficulty_sweep", "episode_seed", "evaluate",
    "generalization_experiment", "read_report", "sweep_lookup", "train_per_level", "worker_count",
    "write_curve", "write_generalization", "write_histogram", "write_report", "write_sweep",
]
