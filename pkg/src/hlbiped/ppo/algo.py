"""PPO with a fixed exploration std, GAE, observation normalization and sequential workers."""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..gait import HLAction
from .net import MLP, Adam
from .normalizer import Normalizer

LOG_2PI = math.log(2.0 * math.pi)
CURVE_COLUMNS = ["iteration", "env_steps", "mean_reward", "mean_episode_length", "policy_loss",
                 "value_loss", "kl", "clip_fraction", "mean_step_reward"]


class NonFiniteLoss(FloatingPointError):
    """A PPO update produced a non-finite loss or gradient."""


@dataclass
class PPOConfig:
    clip: float = 0.2
    lr: float = 3e-4
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 4
    minibatch: int = 512
    workers: int = 8
    steps_per_iter: int = 8192
    sigma: float = 0.15
    hidden: tuple = (128, 128)
    value_coef: float = 1.0
    max_grad_norm: float = 0.5

    def validate(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.clip <= 0.5:
            raise ValueError("clip must lie in (0, 0.5]")
        if self.sigma <= 0 or self.lr <= 0:
            raise ValueError("sigma and lr must be positive")
        if self.workers < 1 or self.steps_per_iter < self.workers or self.minibatch < 1:
            raise ValueError("need >= 1 worker and at least one step per worker")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        return self


@dataclass
class Policy:
    """Policy mean net, value net, observation statistics and the fixed std."""

    pi: MLP
    v: MLP
    norm: Normalizer
    sigma: float

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, sigma: float = 0.15, hidden=(128, 128),
               rng: np.random.Generator | None = None) -> "Policy":
        rng = rng or np.random.default_rng(0)
        pi = MLP((obs_dim, *hidden, act_dim), out="tanh_half", rng=rng)
        v = MLP((obs_dim, *hidden, 1), out="linear", rng=rng)
        return cls(pi, v, Normalizer(obs_dim), float(sigma))

    @property
    def obs_dim(self) -> int:
        return self.pi.sizes[0]

    @property
    def act_dim(self) -> int:
        return self.pi.sizes[-1]

    def forward(self, obs_normalized):
        """(action mean in normalized units, value)."""
        return self.pi.forward(obs_normalized), self.v.forward(obs_normalized)[:, 0]

    def act(self, obs, rng: np.random.Generator | None = None):
        """Normalized action for a raw observation; deterministic (mean) when ``rng`` is None."""
        mean = self.pi.forward(self.norm.normalize(obs))[0]
        if rng is None:
            return mean
        return sample_action(mean, self.sigma, rng)[0]

    def copy(self) -> "Policy":
        return Policy(self.pi.copy(), self.v.copy(), self.norm.copy(), self.sigma)

    def as_env_policy(self, rng: np.random.Generator | None = None):
        def policy(obs, env):
            return HLAction.from_normalized(self.act(obs, rng))
        return policy


def gaussian_logprob(a, mean, sigma: float):
    z = (np.asarray(a) - np.asarray(mean)) / sigma
    return -np.sum(0.5 * z * z + math.log(sigma) + 0.5 * LOG_2PI, axis=-1)


def sample_action(mean, sigma: float, rng: np.random.Generator):
    """Gaussian sample around ``mean`` (normalized units).

    Returns (action clipped to [-1, 1], raw sample, log-probability of the raw sample).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mean = np.asarray(mean, dtype=float)
    raw = mean + sigma * rng.standard_normal(mean.shape)
    return np.clip(raw, -1.0, 1.0), raw, float(gaussian_logprob(raw, mean, sigma))


def gae(rewards, values, dones, gamma: float, lam: float):
    """Generalized advantage estimation.

    ``values`` has one more entry than ``rewards`` (bootstrap value of the
    state after the last transition). Returns (advantages, returns).
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=float)
    if v.shape[0] != r.shape[0] + 1 or d.shape != r.shape:
        raise ValueError("values must have len(rewards) + 1 entries and dones match rewards")
    adv = np.zeros_like(r)
    last = 0.0
    for t in range(len(r) - 1, -1, -1):
        nonterm = 1.0 - d[t]
        delta = r[t] + gamma * v[t + 1] * nonterm - v[t]
        last = delta + gamma * lam * nonterm * last
        adv[t] = last
    return adv, adv + v[:-1]


@dataclass
class RolloutBatch:
    obs: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.rewards)
        for name in ("obs", "actions", "logp", "values", "dones"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"rollout field {name} has the wrong length")

    @staticmethod
    def concat(batches: list["RolloutBatch"]) -> "RolloutBatch":
        cat = lambda k: np.concatenate([getattr(b, k) for b in batches])
        out = RolloutBatch(cat("obs"), cat("actions"), cat("logp"), cat("rewards"), cat("values"),
                           cat("dones"), cat("advantages"), cat("returns"))
        for b in batches:
            out.episode_returns += b.episode_returns
            out.episode_lengths += b.episode_lengths
        return out


def ppo_update(policy: Policy, batch: RolloutBatch, config: PPOConfig, optimizers,
               rng: np.random.Generator) -> dict:
    """Clipped-surrogate policy step plus value regression over ``config.epochs`` passes.

    ``batch.obs`` must already be normalized and advantages standardized.
    """
    opt_pi, opt_v = optimizers
    n = len(batch.rewards)
    mb = min(config.minibatch, n)
    stats = {"policy_loss": [], "value_loss": [], "kl": [], "clip_fraction": []}
    sig2 = policy.sigma**2
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n - mb + 1, mb):
            idx = order[start:start + mb]
            obs, act, adv = batch.obs[idx], batch.actions[idx], batch.advantages[idx]
            mean, acts = policy.pi.forward(obs, cache=True)
            logp = gaussian_logprob(act, mean, policy.sigma)
            ratio = np.exp(logp - batch.logp[idx])
            clipped = np.clip(ratio, 1.0 - config.clip, 1.0 + config.clip)
            surr = np.minimum(ratio * adv, clipped * adv)
            loss_pi = -surr.mean()
            live = np.where(adv >= 0.0, ratio <= 1.0 + config.clip, ratio >= 1.0 - config.clip)
            coef = -(adv * ratio * live) / mb
            g_mean = coef[:, None] * (act - mean) / sig2
            v, vacts = policy.v.forward(obs, cache=True)
            err = v[:, 0] - batch.returns[idx]
            loss_v = 0.5 * float((err * err).mean())
            if not (math.isfinite(loss_pi) and math.isfinite(loss_v)):
                raise NonFiniteLoss(f"policy loss {loss_pi}, value loss {loss_v}")
            g_pi = policy.pi.backward(acts, g_mean)
            g_v = policy.v.backward(vacts, config.value_coef * err[:, None] / mb)
            if not all(np.all(np.isfinite(g)) for g in g_pi + g_v):
                raise NonFiniteLoss("non-finite gradient")
            opt_pi.step(g_pi, config.max_grad_norm)
            opt_v.step(g_v, config.max_grad_norm)
            lr = logp - batch.logp[idx]
            stats["policy_loss"].append(loss_pi)
            stats["value_loss"].append(loss_v)
            stats["kl"].append(float(np.mean(np.exp(lr) - 1.0 - lr)))
            stats["clip_fraction"].append(float(np.mean(np.abs(ratio - 1.0) > config.clip)))
    return {k: float(np.mean(v)) for k, v in stats.items()}


class Worker:
    """Owns one environment and its episode in progress across iterations."""

    def __init__(self, env, rng: np.random.Generator):
        self.env = env
        self.rng = rng
        self.obs = None
        self.ep_return = 0.0
        self.ep_len = 0

    def collect(self, policy: Policy, n_steps: int, gamma: float):
        """Roll out ``n_steps`` transitions with a frozen policy.

        Returns (batch with raw observations, bootstrap value, normalizer delta).
        """
        env = self.env
        delta = Normalizer(policy.obs_dim)
        O, A, LP, R, V, D = [], [], [], [], [], []
        ep_returns, ep_lengths = [], []
        if self.obs is None:
            self.obs = env.reset(seed=int(self.rng.integers(2**31)))
            delta.update(self.obs)
        for _ in range(n_steps):
            z = policy.norm.normalize(self.obs)
            mean, value = policy.forward(z)
            a_env, raw, lp = sample_action(mean[0], policy.sigma, self.rng)
            res = env.hl_step(HLAction.from_normalized(a_env))
            r = res.reward
            done = res.terminated or res.truncated
            if res.truncated and not res.terminated:
                r += gamma * float(policy.forward(policy.norm.normalize(res.observation))[1][0])
            O.append(self.obs)
            A.append(raw)
            LP.append(lp)
            R.append(r)
            V.append(value[0])
            D.append(done)
            self.ep_return += res.reward
            self.ep_len += 1
            if done:
                ep_returns.append(self.ep_return)
                ep_lengths.append(self.ep_len)
                self.ep_return, self.ep_len = 0.0, 0
                self.obs = env.reset(seed=int(self.rng.integers(2**31)))
            else:
                self.obs = res.observation
            delta.update(self.obs)
        boot = float(policy.forward(policy.norm.normalize(self.obs))[1][0])
        batch = RolloutBatch(np.array(O), np.array(A), np.array(LP), np.array(R), np.array(V),
                             np.array(D, dtype=float), episode_returns=ep_returns,
                             episode_lengths=ep_lengths)
        return batch, boot, delta


def write_curve(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in rows:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])


def train(env_factory, config: PPOConfig, iterations: int, seed: int = 0, out_dir=None,
          policy: Policy | None = None, log=None, checkpoint_every: int = 10,
          header: str | None = None):
    """Run PPO; returns (policy, curve rows).

    Workers run one after another in a fixed order, so a seed fully
    determines the result. With ``out_dir`` set, ``policy.bin`` and
    ``curve.csv`` are refreshed every ``checkpoint_every`` iterations, at
    the end, and before a ``NonFiniteLoss`` propagates.
    """
    from .checkpoint import save_checkpoint

    config.validate()
    ss = np.random.SeedSequence(seed)
    s_init, s_upd, *s_workers = ss.spawn(2 + config.workers)
    workers = [Worker(env_factory(), np.random.default_rng(s)) for s in s_workers]
    from ..env import ACT_DIM, OBS_DIM
    if policy is None:
        policy = Policy.create(OBS_DIM, ACT_DIM, config.sigma, config.hidden,
                               np.random.default_rng(s_init))
    opts = (Adam(policy.pi.params, config.lr), Adam(policy.v.params, config.lr))
    rng_upd = np.random.default_rng(s_upd)
    per_worker = config.steps_per_iter // config.workers
    rows = []
    env_steps = 0
    t0 = time.time()

    def flush():
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            save_checkpoint(os.path.join(out_dir, "policy.bin"), policy)
            write_curve(os.path.join(out_dir, "curve.csv"), rows)
            if header:
                _prepend(os.path.join(out_dir, "curve.csv"), header)

    for it in range(iterations):
        results = [w.collect(policy, per_worker, config.gamma) for w in workers]
        for b, boot, _ in results:
            b.advantages, b.returns = gae(b.rewards, np.append(b.values, boot), b.dones,
                                          config.gamma, config.lam)
            b.obs = policy.norm.normalize(b.obs)
        batch = RolloutBatch.concat([r[0] for r in results])
        for _, _, delta in results:
            policy.norm.merge(delta)
        adv = batch.advantages
        batch.advantages = (adv - adv.mean()) / (adv.std() + 1e-8)
        env_steps += len(batch.rewards)
        try:
            st = ppo_update(policy, batch, config, opts, rng_upd)
        except NonFiniteLoss:
            flush()
            raise
        mean_ret = float(np.mean(batch.episode_returns)) if batch.episode_returns else float("nan")
        mean_len = float(np.mean(batch.episode_lengths)) if batch.episode_lengths else float("nan")
        rows.append([it, env_steps, mean_ret, mean_len, st["policy_loss"], st["value_loss"],
                     st["kl"], st["clip_fraction"], float(batch.rewards.mean())])
        if log:
            log(f"iter {it} steps {env_steps} return {mean_ret:.2f} len {mean_len:.1f} "
                f"kl {st['kl']:.4f} clip {st['clip_fraction']:.3f} t {time.time() - t0:.0f}s")
        if out_dir is not None and ((it + 1) % checkpoint_every == 0 or it == iterations - 1):
            flush()
    return policy, rows


def _prepend(path, line):
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        fh.write(f"# {line}\n{body}")


def config_dict(config: PPOConfig) -> dict:
    return asdict(config)
