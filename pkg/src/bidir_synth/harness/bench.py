"""Benchmark drivers: pretrain, fine-tune and evaluate, then write a results CSV and a manifest.

Every run is a pure function of its :class:`BenchConfig`; the manifest stores
the config so ``rerun_from_manifest`` reproduces the CSV byte for byte.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from ..dsl import registry_for
from ..policy.net import NetConfig, NeuralPolicy, PolicyNet
from ..rng import stream
from ..trainer import TrainConfig, evaluate_solve_rate, make_optimizer, reinforce_finetune, supervised_train
from ..traces import (
    TraceGenConfig,
    default_env_config,
    doubleadd_program,
    doubleadd_task,
    gen_dataset,
    gen_random_program,
    program_to_bidir_trace,
)
from .formats import export_results, format_csv
from .suite import symmetry_benchmark_suite

log = logging.getLogger(__name__)

MODES = ("bidir", "fwd")
_ALIASES = {"grids": "grid", "grid": "grid", "grid-symmetry": "grid", "arith24": "arith24", "doubleadd": "doubleadd"}


def canonical_domain(name: str) -> str:
    try:
        return _ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown benchmark domain {name!r}; expected one of {sorted(_ALIASES)}") from None


@dataclass
class BenchConfig:
    domain: str
    modes: tuple = MODES
    seeds: tuple = (0,)
    width: int = 64
    lr: float = 1e-3
    # supervised pretraining
    pretrain_traces: int = 2000
    pretrain_epochs: int = 3
    pretrain_batch: int = 32
    # 24-Game fine-tuning
    depths: tuple = (1, 2, 3, 4)
    rl_epochs: int = 500
    rl_batch: int = 100
    entropy_weight: float = 0.0
    window: int = 50
    # double-and-add evaluation
    heldout: int = 500
    target_range: tuple = (3, 10**5)
    max_steps: int | None = None
    # grid evaluation
    rollouts_per_task: int = 1000
    generated_tasks: int = 0
    # acceptance thresholds; empty means "always pass"
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = canonical_domain(self.domain)
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}; expected one of {MODES}")
        self.modes = tuple(self.modes)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.depths = tuple(int(d) for d in self.depths)
        self.target_range = tuple(self.target_range)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown benchmark config keys {sorted(unknown)}")
        return cls(**d)


def default_bench_config(domain: str, **overrides) -> BenchConfig:
    """Desk-scale protocol for each domain, with its acceptance thresholds."""
    domain = canonical_domain(domain)
    if domain == "arith24":
        # generous supervised pretraining is cheap next to REINFORCE and lets both
        # modes learn single-step tasks
        base = dict(seeds=(0, 1, 2), pretrain_traces=40000, pretrain_epochs=10,
                    thresholds={"min_gap": 0.05, "max_depth1_gap": 0.05})
    elif domain == "doubleadd":
        # one epoch is all the budget allows, so small batches buy enough updates
        base = dict(pretrain_traces=5000, pretrain_epochs=1, pretrain_batch=2, max_steps=20,
                    thresholds={"min_bidir": 0.99, "max_fwd": 0.50})
    else:
        base = dict(pretrain_traces=10000, pretrain_epochs=4, thresholds={"min_solve_rate": 0.60})
    base.update(overrides)
    return BenchConfig(domain, **base)


@dataclass
class BenchResult:
    header: list
    rows: list
    summary: dict
    passed: bool

    @property
    def table(self) -> dict:
        return {"header": self.header, "rows": self.rows}

    def to_csv(self) -> str:
        return format_csv(self.header, self.rows)


# -- shared pieces ---------------------------------------------------------------


def _int_seed(seed: int, *names) -> int:
    return int(stream(seed, *names).integers(2**31 - 1))


def _pretrained(config: BenchConfig, mode: str, seed: int, tg: TraceGenConfig):
    fwd = mode == "fwd"
    env = default_env_config(config.domain, forward_only=fwd)
    torch.manual_seed(_int_seed(seed, "init", config.domain))
    net = PolicyNet(NetConfig(config.domain, width=config.width))
    if config.pretrain_traces > 0 and config.pretrain_epochs > 0:
        data = gen_dataset(tg, config.pretrain_traces, seed=seed, env_config=env)
        tc = TrainConfig(epochs=config.pretrain_epochs, batch_size=config.pretrain_batch, lr=config.lr,
                         seed=_int_seed(seed, "pretrain", mode), domain=config.domain)
        net, report = supervised_train(data, net, tc)
        log.info("%s/%s seed %d pretrain losses %s", config.domain, mode, seed, report.losses)
    return net, env


def _p_invert(config: BenchConfig, mode: str) -> float:
    if mode == "fwd":
        return 0.0
    # double-and-add is solved backwards along the whole chain
    return 1.0 if config.domain == "doubleadd" else 0.5


# -- per-domain protocols -----------------------------------------------------------


def _bench_arith(config: BenchConfig):
    header = ["mode", "depth", "seed", "solve_rate"]
    rows, rates = [], {}
    for seed in config.seeds:
        for mode in config.modes:
            tg = TraceGenConfig("arith24", p_invert=_p_invert(config, mode))
            net, env = _pretrained(config, mode, seed, tg)
            for depth in config.depths:
                tuned = copy.deepcopy(net)
                tuned.invalidate()
                dtg = TraceGenConfig("arith24", min_depth=depth, max_depth=depth)
                sampler = lambda rng, dtg=dtg: gen_random_program(dtg, rng)[1]  # noqa: E731
                tc = TrainConfig(mode="reinforce", epochs=config.rl_epochs, batch_size=config.rl_batch,
                                 lr=config.lr, entropy_weight=config.entropy_weight,
                                 seed=_int_seed(seed, "reinforce", mode, depth), domain="arith24",
                                 depth=depth, window=config.window)
                _, report = reinforce_finetune(sampler, tuned, tc, env)
                rate = report.final_solve_rate
                rates[(mode, depth, seed)] = rate
                rows.append([mode, depth, seed, rate])
                log.info("arith24 %s depth %d seed %d: %.4f", mode, depth, seed, rate)
    summary = {"mean": {}}
    for mode in config.modes:
        for depth in config.depths:
            m = float(np.mean([rates[(mode, depth, s)] for s in config.seeds]))
            summary["mean"][f"{mode}/{depth}"] = m
            rows.append([mode, depth, "mean", m])
    passed = True
    th = config.thresholds
    if set(MODES) <= set(config.modes):
        gaps = {d: summary["mean"][f"bidir/{d}"] - summary["mean"][f"fwd/{d}"] for d in config.depths}
        summary["gap"] = gaps
        if "min_gap" in th:
            passed &= all(g >= th["min_gap"] for d, g in gaps.items() if d >= 2)
        if "max_depth1_gap" in th and 1 in gaps:
            passed &= abs(gaps[1]) <= th["max_depth1_gap"]
    return header, rows, summary, passed


def doubleadd_splits(config: BenchConfig, seed: int):
    """Disjoint train/held-out target sets drawn uniformly from ``target_range``."""
    lo, hi = config.target_range
    train_rng = stream(seed, "doubleadd-train-targets")
    train = [int(x) for x in train_rng.integers(lo, hi + 1, size=config.pretrain_traces)]
    seen = set(train)
    rng = stream(seed, "doubleadd-heldout")
    held = []
    while len(held) < config.heldout:
        t = int(rng.integers(lo, hi + 1))
        if t not in seen:
            seen.add(t)
            held.append(t)
    return train, held


def _bench_doubleadd(config: BenchConfig):
    header = ["mode", "seed", "epoch", "heldout_solve_rate"]
    rows, final = [], {}
    reg = registry_for("doubleadd")
    for seed in config.seeds:
        train_targets, held = doubleadd_splits(config, seed)
        held_tasks = [doubleadd_task(t) for t in held]
        for mode in config.modes:
            fwd = mode == "fwd"
            env = default_env_config("doubleadd", forward_only=fwd)
            eval_env = default_env_config("doubleadd", forward_only=fwd,
                                          **({"max_steps": config.max_steps} if config.max_steps else {}))
            torch.manual_seed(_int_seed(seed, "init", "doubleadd"))
            net = PolicyNet(NetConfig("doubleadd", width=config.width))
            data = []
            for i, t in enumerate(train_targets):
                rng = stream(seed, "doubleadd-trace", i)
                data.append(program_to_bidir_trace(doubleadd_program(t, reg), doubleadd_task(t),
                                                   _p_invert(config, mode), rng, env))
            policy = NeuralPolicy(net, greedy=True)
            opt = make_optimizer(net, TrainConfig(lr=config.lr))
            rate, _ = evaluate_solve_rate(held_tasks, policy, 1, eval_env, seed=seed)
            rows.append([mode, seed, 0, rate])
            for epoch in range(1, config.pretrain_epochs + 1):
                tc = TrainConfig(epochs=1, batch_size=config.pretrain_batch, lr=config.lr,
                                 seed=_int_seed(seed, "pretrain", mode, epoch), domain="doubleadd")
                net, _ = supervised_train(data, net, tc, opt=opt)
                rate, _ = evaluate_solve_rate(held_tasks, policy, 1, eval_env, seed=seed)
                rows.append([mode, seed, epoch, rate])
                log.info("doubleadd %s seed %d epoch %d: %.4f", mode, seed, epoch, rate)
            final[(mode, seed)] = rate
    summary = {m: float(np.mean([final[(m, s)] for s in config.seeds])) for m in config.modes}
    th = config.thresholds
    passed = True
    if "min_bidir" in th and "bidir" in summary:
        passed &= summary["bidir"] >= th["min_bidir"]
    if "max_fwd" in th and "fwd" in summary:
        passed &= summary["fwd"] <= th["max_fwd"]
    return header, rows, summary, passed


def _bench_grids(config: BenchConfig):
    header = ["mode", "seed", "task", "solved", "rollouts", "program"]
    rows, summary = [], {}
    for seed in config.seeds:
        suite = [t for t, _ in symmetry_benchmark_suite(seed, config.generated_tasks)]
        for mode in config.modes:
            tg = TraceGenConfig("grid", p_invert=_p_invert(config, mode))
            net, env = _pretrained(config, mode, seed, tg)
            eval_env = env if not config.max_steps else default_env_config("grid", mode == "fwd",
                                                                            max_steps=config.max_steps)
            rate, table = evaluate_solve_rate(suite, NeuralPolicy(net), config.rollouts_per_task, eval_env,
                                              seed=_int_seed(seed, "evaluate", mode))
            for r in table:
                rows.append([mode, seed, r["task"], int(r["solved"]), r["rollouts"], r["program"]])
            summary[f"{mode}/{seed}"] = rate
            log.info("grids %s seed %d: %.4f", mode, seed, rate)
    passed = True
    if "min_solve_rate" in config.thresholds and "bidir" in config.modes:
        passed = all(summary[f"bidir/{s}"] >= config.thresholds["min_solve_rate"] for s in config.seeds)
    return header, rows, summary, passed


_DRIVERS = {"arith24": _bench_arith, "doubleadd": _bench_doubleadd, "grid": _bench_grids}


def run_benchmark(domain: str, mode: str = "both", config: BenchConfig | None = None) -> BenchResult:
    """Run one domain's protocol; ``mode`` is ``bidir``, ``fwd`` or ``both``."""
    config = copy.deepcopy(config) if config is not None else default_bench_config(domain)
    if canonical_domain(domain) != config.domain:
        raise ValueError(f"config is for {config.domain!r}, not {domain!r}")
    if mode != "both":
        config.modes = (mode,)
    header, rows, summary, passed = _DRIVERS[config.domain](config)
    return BenchResult(header, rows, summary, bool(passed))


# -- manifests ------------------------------------------------------------------------


def code_version() -> str:
    """Package version plus a digest of the package sources."""
    from .. import __version__

    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.py")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def run_and_record(domain: str, mode: str, config: BenchConfig, out_dir, command: str = "bench") -> BenchResult:
    """Run a benchmark and write ``results.csv``, ``summary.json`` and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    result = run_benchmark(domain, mode, config)
    end = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    export_results(result.table, out / "results.csv")
    (out / "summary.json").write_text(json.dumps({"summary": _jsonable(result.summary), "passed": result.passed},
                                                 indent=2, sort_keys=True))
    manifest = {
        "command": command,
        "domain": config.domain,
        "mode": mode,
        "config": config.to_dict(),
        "seed": list(config.seeds),
        "code_version": code_version(),
        "start_time": start,
        "end_time": end,
        "outputs": ["results.csv", "summary.json"],
        "passed": result.passed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return result


def rerun_from_manifest(manifest_path, out_dir) -> BenchResult:
    m = json.loads(Path(manifest_path).read_text())
    config = BenchConfig.from_dict(m["config"])
    return run_and_record(m["domain"], m["mode"], config, out_dir, command=m.get("command", "bench"))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x
