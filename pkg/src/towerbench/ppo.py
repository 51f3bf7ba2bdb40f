"""Masked categorical policy, GAE and the clipped-surrogate PPO trainer.

Actor and critic are separate :class:`~towerbench.nn.Mlp` instances with no
shared weights. The actor outputs 5 logits; masked actions get probability
exactly zero.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .env import OBS_SIZE, EnvConfig, TowerEnv
from .errors import CheckpointError, LengthMismatch, NonFiniteLoss, ShapeError
from .levels import LevelDef
from .nn import Adam, Mlp, clip_grad_norm
from .strategies import N_ACTIONS


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    lr: float = 3e-4
    epochs: int = 4
    minibatch_size: int = 256
    rollout_size: int = 4096
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    total_episodes: int = 2000
    hidden: int = 64
    difficulty: int = 100_000
    curve_interval: int = 100

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be > 0")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class PolicyOutput:
    logits: np.ndarray
    masked_probs: np.ndarray
    value: Optional[float] = None


def build_actor(hidden: int, rng: np.random.Generator, in_size: int = OBS_SIZE) -> Mlp:
    return Mlp([in_size, hidden, hidden, N_ACTIONS], rng, out_gain=0.01)


def build_critic(hidden: int, rng: np.random.Generator, in_size: int = OBS_SIZE) -> Mlp:
    return Mlp([in_size, hidden, hidden, 1], rng, out_gain=1.0)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    lse = zmax + np.log(np.exp(z - zmax).sum(axis=-1, keepdims=True))
    return z - lse


def forward_actor(actor: Mlp, obs: np.ndarray, mask: np.ndarray) -> PolicyOutput:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != actor.sizes[0]:
        raise ShapeError(f"observation width {obs.shape[-1]} != {actor.sizes[0]}")
    logits = actor(obs.reshape(-1, actor.sizes[0]))
    mask = np.asarray(mask, dtype=bool).reshape(logits.shape)
    probs = masked_softmax(logits, mask)
    if obs.ndim == 1:
        return PolicyOutput(logits[0], probs[0])
    return PolicyOutput(logits, probs)


def forward_critic(critic: Mlp, obs: np.ndarray):
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != critic.sizes[0]:
        raise ShapeError(f"observation width {obs.shape[-1]} != {critic.sizes[0]}")
    v = critic(obs.reshape(-1, critic.sizes[0]))[:, 0]
    return float(v[0]) if obs.ndim == 1 else v


def sample_action(probs: np.ndarray, u):
    """Inverse-CDF draw for uniform ``u`` in [0, 1) (scalar or array).

    Zero-probability entries are flat steps of the CDF and can never be hit;
    the clamp only guards rounding at the top end.
    """
    cdf = np.cumsum(probs)
    a = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    a = np.minimum(a, np.flatnonzero(probs)[-1])
    return int(a) if a.ndim == 0 else a


# -----------------------------------------------------------------------------
# advantages

def gae(rewards, values, terminals, gamma: float, lam: float, last_value: float = 0.0):
    """Generalized advantage estimates and returns over a flat buffer.

    The bootstrap value is zero after every terminal step; ``last_value`` is
    used only if the buffer ends on a non-terminal step.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    terminals = np.asarray(terminals, dtype=bool)
    if not (rewards.shape == values.shape == terminals.shape) or rewards.ndim != 1:
        raise LengthMismatch(f"rewards {rewards.shape}, values {values.shape}, terminals {terminals.shape}")
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        if terminals[t]:
            next_value, running = 0.0, 0.0
        else:
            next_value = values[t + 1] if t + 1 < n else last_value
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + values


# -----------------------------------------------------------------------------
# loss

@dataclass
class RolloutBuffer:
    obs: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    terminals: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    def add(self, obs, mask, action, log_prob, reward, terminal, value=0.0) -> None:
        self.obs.append(obs)
        self.masks.append(mask)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.rewards.append(reward)
        self.terminals.append(terminal)
        self.values.append(value)

    def arrays(self) -> dict:
        return {
            "obs": np.asarray(self.obs, dtype=np.float64),
            "masks": np.asarray(self.masks, dtype=bool),
            "actions": np.asarray(self.actions, dtype=np.int64),
            "log_probs": np.asarray(self.log_probs, dtype=np.float64),
            "rewards": np.asarray(self.rewards, dtype=np.float64),
            "values": np.asarray(self.values, dtype=np.float64),
            "terminals": np.asarray(self.terminals, dtype=bool),
        }


def ppo_loss(actor: Mlp, critic: Mlp, batch: dict, cfg: TrainConfig, need_grads: bool = True):
    """Clipped surrogate + value + entropy loss, with analytic gradients.

    ``batch`` carries obs, masks, actions, log_probs (behaviour policy),
    advantages and returns. Returns (loss, stats, actor_grads, critic_grads).
    """
    obs, masks, actions = batch["obs"], batch["masks"], batch["actions"]
    adv, ret, old_logp = batch["advantages"], batch["returns"], batch["log_probs"]
    b = len(actions)
    idx = np.arange(b)

    logits, cache_a = actor.forward(obs)
    logp_all = masked_log_softmax(logits, masks)
    probs = np.exp(logp_all)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1 - cfg.clip_eps, 1 + cfg.clip_eps)
    s1, s2 = ratio * adv, clipped * adv
    policy_loss = -np.minimum(s1, s2).mean()
    plogp = np.where(masks, probs * np.where(masks, logp_all, 0.0), 0.0)
    entropy = -plogp.sum(axis=1)

    v, cache_c = critic.forward(obs)
    v = v[:, 0]
    value_loss = np.mean((v - ret) ** 2)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy.mean()
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss={loss} policy={policy_loss} value={value_loss} "
                            f"entropy={entropy.mean()} max|logit|={np.abs(logits).max()}")
    stats = {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio - 1) > cfg.clip_eps)),
        "approx_kl": float(np.mean(old_logp - logp)),
    }
    if not need_grads:
        return float(loss), stats, None, None

    # d loss / d logp(a): the surrogate passes gradient only where the unclipped term is the min
    active = s1 <= s2
    g_logp = np.where(active, -adv * ratio, 0.0) / b
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    dlogits = g_logp[:, None] * (onehot - probs)
    # entropy term: dH/dz_j = -p_j (log p_j + H)
    safe_logp = np.where(masks, logp_all, 0.0)
    dlogits += (cfg.entropy_coef / b) * probs * (safe_logp + entropy[:, None])
    dlogits = np.where(masks, dlogits, 0.0)
    g_actor = actor.backward(cache_a, dlogits)

    dv = (2 * cfg.value_coef / b) * (v - ret)
    g_critic = critic.backward(cache_c, dv[:, None])
    return float(loss), stats, g_actor, g_critic


def ppo_update(actor: Mlp, critic: Mlp, data: dict, cfg: TrainConfig, rng: np.random.Generator,
               opt_actor: Adam, opt_critic: Adam) -> dict:
    """Epochs of shuffled minibatch steps over one rollout; returns mean stats."""
    n = len(data["actions"])
    if n == 0:
        raise ValueError("empty rollout buffer")
    adv = data["advantages"]
    std = adv.std()
    data = dict(data, advantages=(adv - adv.mean()) / max(std, 1e-8))
    totals: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            mb = order[start:start + cfg.minibatch_size]
            batch = {k: v[mb] for k, v in data.items()}
            _, stats, ga, gc = ppo_loss(actor, critic, batch, cfg)
            clip_grad_norm(ga, cfg.max_grad_norm)
            clip_grad_norm(gc, cfg.max_grad_norm)
            opt_actor.step(ga)
            opt_critic.step(gc)
            for k, val in stats.items():
                totals[k] = totals.get(k, 0.0) + val
            count += 1
    return {k: v / count for k, v in totals.items()}


# -----------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    actor: Mlp
    critic: Mlp
    curve: list  # (episodes completed, success rate over the interval)
    updates: list = field(default_factory=list)
    seed: int = 0
    config: Optional[TrainConfig] = None


def run_policy_episode(env: TowerEnv, actor: Mlp, level: LevelDef, difficulty: int, seed: int,
                       rng: Optional[np.random.Generator] = None, buffer: Optional[RolloutBuffer] = None,
                       stochastic: bool = True):
    """One episode under the actor; fills ``buffer`` if given. Returns env totals."""
    step = env.reset(level, difficulty, seed)
    total = step.reward_prev
    actions = []
    while not step.terminal:
        logits = actor.forward_one(step.observation)
        probs = masked_softmax(logits, step.mask)
        if stochastic:
            a = sample_action(probs, rng.random())
        else:
            a = int(np.argmax(np.where(step.mask, probs, -1.0)))
        nxt = env.step(a)
        if buffer is not None:
            buffer.add(step.observation, step.mask, a, float(np.log(probs[a])), nxt.reward_prev, nxt.terminal)
        actions.append(a)
        total += nxt.reward_prev
        step = nxt
    return env.won, total, actions


def train(levels: Sequence[LevelDef], config: TrainConfig = TrainConfig(), seed: int = 0,
          env_config: Optional[EnvConfig] = None,
          progress: Optional[Callable[[int, dict], None]] = None) -> TrainResult:
    """Train one actor/critic pair; each episode draws its level uniformly."""
    if not levels:
        raise ValueError("need at least one level")
    rng = np.random.default_rng(seed)
    actor = build_actor(config.hidden, rng)
    critic = build_critic(config.hidden, rng)
    result = TrainResult(actor, critic, [], [], seed, config)
    if config.total_episodes <= 0:
        return result
    opt_a = Adam(actor.params, config.lr)
    opt_c = Adam(critic.params, config.lr)
    env = TowerEnv(env_config)
    done = 0
    interval_wins = 0
    interval_n = 0
    while done < config.total_episodes:
        buf = RolloutBuffer()
        while len(buf) < config.rollout_size and done < config.total_episodes:
            level = levels[int(rng.integers(len(levels)))] if len(levels) > 1 else levels[0]
            ep_seed = int(rng.integers(2**31 - 1))
            won, _, _ = run_policy_episode(env, actor, level, config.difficulty, ep_seed, rng, buf)
            done += 1
            interval_wins += int(won)
            interval_n += 1
            if interval_n == config.curve_interval:
                result.curve.append((done, interval_wins / interval_n))
                interval_wins = interval_n = 0
        if len(buf) == 0:
            continue
        data = buf.arrays()
        data["values"] = forward_critic(critic, data["obs"])
        adv, ret = gae(data["rewards"], data["values"], data["terminals"], config.gamma, config.gae_lambda)
        data["advantages"], data["returns"] = adv, ret
        del data["rewards"], data["values"], data["terminals"]
        stats = ppo_update(actor, critic, data, config, rng, opt_a, opt_c)
        stats["episodes"] = done
        result.updates.append(stats)
        if progress is not None:
            progress(done, stats)
    if interval_n:
        result.curve.append((done, interval_wins / interval_n))
    return result


# -----------------------------------------------------------------------------
# checkpoints

MAGIC = b"TBCKPT\x00\x00"
VERSION = 1


def save_checkpoint(path, actor: Mlp, critic: Mlp, config: Optional[TrainConfig] = None, seed: int = 0,
                    meta: Optional[dict] = None) -> None:
    """Header (layouts, config hash, seed) then little-endian float64 arrays,
    actor layers first, each layer as weights then bias."""
    header = {
        "version": VERSION,
        "actor_sizes": list(actor.sizes),
        "critic_sizes": list(critic.sizes),
        "config_hash": config.digest() if config else None,
        "config": asdict(config) if config else None,
        "seed": int(seed),
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for p in actor.params + critic.params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path, expect_actor_sizes=None, expect_critic_sizes=None):
    """Returns (actor, critic, header); raises CheckpointError on any mismatch."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a towerbench checkpoint")
    try:
        version, hlen = struct.unpack("<II", raw[8:16])
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    a_sizes, c_sizes = tuple(header["actor_sizes"]), tuple(header["critic_sizes"])
    if expect_actor_sizes is not None and tuple(expect_actor_sizes) != a_sizes:
        raise CheckpointError(f"actor layout {a_sizes} != expected {tuple(expect_actor_sizes)}")
    if expect_critic_sizes is not None and tuple(expect_critic_sizes) != c_sizes:
        raise CheckpointError(f"critic layout {c_sizes} != expected {tuple(expect_critic_sizes)}")
    actor, critic = Mlp.zeros(a_sizes), Mlp.zeros(c_sizes)
    offset = 16 + hlen
    for p in actor.params + critic.params:
        nbytes = p.size * 8
        chunk = raw[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated parameter data")
        p[...] = np.frombuffer(chunk, dtype="<f8").reshape(p.shape)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return actor, critic, header
