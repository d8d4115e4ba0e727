"""Supervised pretraining on traces, REINFORCE fine-tuning and solve-rate evaluation."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from .env import EnvConfig, SynthEnv, valid_action_mask
from .harness.formats import format_csv
from .policy.base import Policy
from .policy.net import NeuralPolicy, PolicyNet
from .program import check_solution
from .rng import stream
from .values import Task

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "supervised"
    epochs: int = 1
    batch_size: int = 32
    lr: float = 1e-3
    entropy_weight: float = 0.0
    seed: int = 0
    domain: str = "arith24"
    depth: int | None = None
    baseline: str = "running-mean"
    baseline_momentum: float = 0.9
    gamma: float = 1.0
    window: int = 50
    grad_clip: float | None = 5.0

    def __post_init__(self):
        if self.mode not in ("supervised", "reinforce"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.baseline not in ("none", "running-mean"):
            raise ValueError(f"unknown baseline {self.baseline!r}")


@dataclass
class TrainReport:
    seed: int
    rows: list = field(default_factory=list)
    window: int = 50

    def add(self, epoch, loss, solve_rate=float("nan"), invalid_rate=float("nan")):
        self.rows.append(
            {"epoch": epoch, "loss": float(loss), "solve_rate": float(solve_rate), "invalid_rate": float(invalid_rate)}
        )

    @property
    def losses(self) -> list[float]:
        return [r["loss"] for r in self.rows]

    @property
    def final_solve_rate(self) -> float:
        """Mean per-epoch solve-rate over the last ``window`` epochs."""
        rates = [r["solve_rate"] for r in self.rows[-self.window :]]
        return float(np.mean(rates)) if rates else float("nan")

    def to_csv(self) -> str:
        header = ["epoch", "loss", "solve_rate", "invalid_rate"]
        return format_csv(header, [[r[h] for h in header] for r in self.rows])


def make_optimizer(net, config: TrainConfig):
    return torch.optim.Adam(net.parameters(), lr=config.lr)


def _step(net, opt, loss, config: TrainConfig, what: str):
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"{what}: non-finite loss {loss.item()} (seed {config.seed})")
    opt.zero_grad()
    loss.backward()
    if config.grad_clip:
        torch.nn.utils.clip_grad_norm_(net.parameters(), config.grad_clip)
    for p in net.parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise TrainingDiverged(f"{what}: non-finite gradient (seed {config.seed})")
    opt.step()
    net.invalidate()


# -- supervised -----------------------------------------------------------------


def supervised_train(dataset, net: PolicyNet, config: TrainConfig, opt=None, on_epoch: Callable | None = None):
    """Minimise the negative log-likelihood of trace actions.

    Batches are groups of ``batch_size`` whole traces, so states of one trace
    share their embedding work.
    """
    torch.manual_seed(config.seed)
    opt = opt or make_optimizer(net, config)
    report = TrainReport(config.seed, window=config.window)
    rng = stream(config.seed, "supervised-shuffle")
    traces = [t for t in dataset if len(t.actions)]
    for epoch in range(config.epochs):
        order = rng.permutation(len(traces))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [traces[i] for i in order[start : start + config.batch_size]]
            obs = [o for t in batch for o in t.observations]
            acts = [a for t in batch for a in t.actions]
            logp, _ = net.log_prob_batch(obs, acts)
            loss = -logp.mean()
            _step(net, opt, loss, config, f"supervised epoch {epoch}")
            total += float(-logp.detach().sum())
            count += len(acts)
        report.add(epoch, total / count if count else 0.0)
        if on_epoch is not None:
            on_epoch(epoch, report)
        log.info("supervised epoch %d loss %.4f", epoch, report.rows[-1]["loss"])
    return net, report


# -- rollouts ---------------------------------------------------------------------


@dataclass
class Episode:
    task: Task
    observations: list
    actions: list
    masks: list
    rewards: list
    solved: bool
    invalid: int
    program: object = None

    @property
    def ret(self) -> float:
        return float(sum(self.rewards))


def rollout_batch(
    tasks: Sequence[Task],
    policy: Policy,
    env_config: EnvConfig,
    rng: np.random.Generator,
    record: bool = True,
) -> list[Episode]:
    """Run one episode per task, stepping all environments in lockstep."""
    envs = [SynthEnv(env_config) for _ in tasks]
    obs = [env.reset(t) for env, t in zip(envs, tasks)]
    eps = [Episode(t, [], [], [], [], False, 0) for t in tasks]
    for env, ep in zip(envs, eps):
        if env.done:
            ep.solved, ep.program = env.solved, env.program
            ep.rewards.append(env.episode_return)
    active = [i for i, env in enumerate(envs) if not env.done]
    while active:
        cur = [obs[i] for i in active]
        masks = [valid_action_mask(o) for o in cur]
        actions = policy.act_batch(cur, rng, tasks=[tasks[i] for i in active], masks=masks)
        still = []
        for i, o, m, a in zip(active, cur, masks, actions):
            ob, r, done, info = envs[i].step(a)
            ep = eps[i]
            if record:
                ep.observations.append(o)
                ep.masks.append(m)
                ep.actions.append(a)
            ep.rewards.append(r)
            obs[i] = ob
            if done:
                ep.solved = envs[i].solved
                ep.program = envs[i].program
                ep.invalid = envs[i].invalid_actions
            else:
                still.append(i)
        active = still
    return eps


def evaluate_solve_rate(
    task_set: Sequence[Task],
    policy: Policy,
    rollouts_per_task: int,
    env_config: EnvConfig,
    seed: int = 0,
    chunk: int = 100,
    strict_usage: bool = False,
    time_budget: float | None = None,
):
    """Fraction of tasks solved by any rollout, checked against train and test pairs.

    Rollouts are scheduled round-robin over unsolved tasks in chunks.  Results
    are deterministic under ``seed`` unless ``time_budget`` (seconds) cuts the
    schedule short.
    """
    deadline = None if time_budget is None else time.monotonic() + time_budget
    rng = stream(seed, "evaluate")
    solved: dict[int, object] = {}
    used = [0] * len(task_set)
    first = {}
    while True:
        pending = [i for i in range(len(task_set)) if i not in solved and used[i] < rollouts_per_task]
        if not pending or (deadline is not None and time.monotonic() > deadline):
            break
        batch_tasks, owners, ordinals = [], [], []
        for i in pending:
            n = min(chunk, rollouts_per_task - used[i])
            batch_tasks += [task_set[i]] * n
            owners += [i] * n
            ordinals += range(used[i] + 1, used[i] + n + 1)
            used[i] += n
        for start in range(0, len(batch_tasks), max(chunk, 1)):
            sub = batch_tasks[start : start + chunk]
            eps = rollout_batch(sub, policy, env_config, rng, record=False)
            for ep, i, k in zip(eps, owners[start : start + chunk], ordinals[start : start + chunk]):
                if i in solved or not ep.solved:
                    continue
                if check_solution(ep.program, task_set[i], strict_usage):
                    solved[i] = ep.program
                    first[i] = k
    table = [
        {
            "task": t.id,
            "solved": i in solved,
            "rollouts": first.get(i, used[i]),
            "program": str(solved[i]) if i in solved else "",
        }
        for i, t in enumerate(task_set)
    ]
    frac = len(solved) / len(task_set) if task_set else 0.0
    return frac, table


# -- REINFORCE ---------------------------------------------------------------------


def episode_return(rewards: Sequence[float], gamma: float = 1.0) -> float:
    return float(sum(r * gamma**t for t, r in enumerate(rewards)))


def reinforce_loss(net: PolicyNet, episodes: Sequence[Episode], returns, baseline: float, entropy_weight: float):
    """Surrogate whose gradient is the REINFORCE estimate (negated, for minimisation)."""
    obs, acts, masks, owner = [], [], [], []
    for k, ep in enumerate(episodes):
        obs += ep.observations
        acts += ep.actions
        masks += ep.masks
        owner += [k] * len(ep.actions)
    if not obs:
        return None
    logp, ent = net.log_prob_batch(obs, acts, masks)
    adv = torch.tensor([returns[k] - baseline for k in owner], dtype=logp.dtype)
    n = len(episodes)
    return -(adv * logp).sum() / n - entropy_weight * ent.sum() / n


def reinforce_finetune(
    task_sampler: Callable[[np.random.Generator], Task],
    net: PolicyNet,
    config: TrainConfig,
    env_config: EnvConfig,
    opt=None,
    on_epoch: Callable | None = None,
):
    torch.manual_seed(config.seed)
    opt = opt or make_optimizer(net, config)
    report = TrainReport(config.seed, window=config.window)
    policy = NeuralPolicy(net)
    task_rng = stream(config.seed, "reinforce-tasks")
    act_rng = stream(config.seed, "reinforce-actions")
    baseline = None
    for epoch in range(config.epochs):
        tasks = [task_sampler(task_rng) for _ in range(config.batch_size)]
        eps = rollout_batch(tasks, policy, env_config, act_rng)
        returns = [episode_return(ep.rewards, config.gamma) for ep in eps]
        mean_ret = float(np.mean(returns))
        if config.baseline == "none":
            b = 0.0
        else:
            b = mean_ret if baseline is None else baseline
        loss = reinforce_loss(net, eps, returns, b, config.entropy_weight)
        if loss is not None:
            _step(net, opt, loss, config, f"reinforce epoch {epoch}")
        if config.baseline == "running-mean":
            m = config.baseline_momentum
            baseline = mean_ret if baseline is None else m * baseline + (1 - m) * mean_ret
        n_steps = sum(len(ep.actions) for ep in eps)
        report.add(
            epoch,
            0.0 if loss is None else float(loss.detach()),
            float(np.mean([ep.solved for ep in eps])),
            sum(ep.invalid for ep in eps) / max(n_steps, 1),
        )
        if on_epoch is not None:
            on_epoch(epoch, report)
    return net, report
