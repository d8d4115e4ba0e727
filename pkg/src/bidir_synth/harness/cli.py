"""``synth`` command line: solve, train, bench, gen-traces."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import torch

from ..closure import bidirectional_closure
from ..dsl import registry_for
from ..policy import NetConfig, NeuralPolicy, OraclePolicy, PolicyNet, RandomPolicy
from ..rng import stream
from ..trainer import TrainConfig, evaluate_solve_rate, reinforce_finetune, supervised_train
from ..traces import (
    TraceGenConfig,
    default_env_config,
    doubleadd_program,
    gen_dataset,
    gen_random_program,
    load_traces,
    program_to_bidir_trace,
    save_traces,
)
from .bench import canonical_domain, default_bench_config, rerun_from_manifest, run_and_record
from .checkpoint import load_checkpoint, save_checkpoint
from .formats import export_results, load_arc_tasks
from .suite import CURATED, curated_suite

log = logging.getLogger("synth")


def reference_program(task, domain: str):
    """A known solution used by the oracle policy, or None."""
    reg = registry_for(domain)
    if domain == "grid":
        for task_id, _, _ in CURATED:
            if task.id == task_id:
                return next(p for t, p in curated_suite() if t.id == task_id)
        return None
    if domain == "doubleadd":
        return doubleadd_program(task.train[0].output, reg)
    return bidirectional_closure(task, reg, max_cost=4)


def _load_tasks(domain: str, spec: str):
    if spec == "suite":
        if domain != "grid":
            raise SystemExit("--tasks suite is only available for the grid domain")
        return [t for t, _ in curated_suite()]
    return load_arc_tasks(spec)


def cmd_solve(args) -> int:
    domain = canonical_domain(args.domain)
    tasks = _load_tasks(domain, args.tasks)
    env = default_env_config(domain, forward_only=args.forward_only,
                             **({"max_steps": args.max_steps} if args.max_steps else {}))
    rollouts = args.rollouts
    if args.policy == "random":
        policy = RandomPolicy()
    elif args.policy == "neural":
        if not args.checkpoint:
            raise SystemExit("--policy neural needs --checkpoint")
        policy = NeuralPolicy(load_checkpoint(args.checkpoint))
    else:
        traces, keep = [], []
        for i, t in enumerate(tasks):
            prog = reference_program(t, domain)
            if prog is None:
                log.warning("no reference program for task %s; skipped", t.id)
                continue
            traces.append(program_to_bidir_trace(prog, t, 0.0 if args.forward_only else args.p_invert,
                                                 stream(args.seed, "oracle", i), env))
            keep.append(t)
        tasks, policy, rollouts = keep, OraclePolicy(traces), 1
    rate, table = evaluate_solve_rate(tasks, policy, rollouts, env, seed=args.seed, time_budget=args.timeout)
    for row in table:
        print(f"{row['task']}\t{'solved' if row['solved'] else 'unsolved'}\t{row['rollouts']}\t{row['program']}")
    print(f"solved {sum(r['solved'] for r in table)}/{len(table)} ({rate:.4f})")
    if args.out:
        header = ["task", "solved", "rollouts", "program"]
        export_results({"header": header, "rows": [[r[h] if h != "solved" else int(r[h]) for h in header]
                                                  for r in table]}, args.out)
    return 0


def cmd_train(args) -> int:
    domain = canonical_domain(args.domain)
    torch.manual_seed(args.seed)
    net = load_checkpoint(args.checkpoint) if args.checkpoint else PolicyNet(NetConfig(domain, width=args.width))
    env = default_env_config(domain, forward_only=args.forward_only)
    config = TrainConfig(mode=args.mode, epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                         entropy_weight=args.entropy, seed=args.seed, domain=domain, depth=args.depth)
    if args.mode == "supervised":
        if args.traces_file:
            data = load_traces(args.traces_file, env)
        else:
            lo, hi = (args.depth, args.depth) if args.depth else (1, 4)
            p = 0.0 if args.forward_only else args.p_invert
            tg = TraceGenConfig(domain, min_depth=lo, max_depth=hi, p_invert=p)
            data = gen_dataset(tg, args.traces, seed=args.seed, env_config=env)
        net, report = supervised_train(data, net, config)
    else:
        lo, hi = (args.depth, args.depth) if args.depth else (1, 4)
        tg = TraceGenConfig(domain, min_depth=lo, max_depth=hi)
        net, report = reinforce_finetune(lambda rng: gen_random_program(tg, rng)[1], net, config, env)
    save_checkpoint(net, args.out)
    report_path = args.report or str(Path(args.out).with_suffix(".csv"))
    Path(report_path).write_text(report.to_csv())
    print(f"checkpoint {args.out}; report {report_path} (seed {args.seed})")
    return 0


def cmd_bench(args) -> int:
    if args.manifest:
        result = rerun_from_manifest(args.manifest, args.out)
    else:
        overrides = json.loads(args.config) if args.config else {}
        if args.seeds:
            overrides["seeds"] = [int(s) for s in args.seeds.split(",")]
        config = default_bench_config(args.domain, **overrides)
        mode = {"bidir": "bidir", "fwd": "fwd", "both": "both"}[args.mode]
        result = run_and_record(args.domain, mode, config, args.out)
    print(result.to_csv(), end="")
    print(json.dumps({"passed": result.passed}))
    return 0 if result.passed else 1


def cmd_gen_traces(args) -> int:
    domain = canonical_domain(args.domain)
    env = default_env_config(domain)
    tg = TraceGenConfig(domain, min_depth=args.min_depth, max_depth=args.max_depth, p_invert=args.p_invert)
    traces = gen_dataset(tg, args.count, seed=args.seed, env_config=env)
    save_traces(traces, args.out, domain)
    print(f"wrote {len(traces)} traces to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synth", description="Bidirectional program synthesis")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="search for programs solving tasks")
    s.add_argument("--domain", required=True)
    s.add_argument("--tasks", required=True, help="ARC JSON file or directory, or 'suite' for the bundled grid tasks")
    s.add_argument("--policy", choices=("random", "oracle", "neural"), default="random")
    s.add_argument("--checkpoint")
    s.add_argument("--timeout", type=float, default=None, help="wall-clock budget in seconds")
    s.add_argument("--forward-only", action="store_true")
    s.add_argument("--rollouts", type=int, default=1000, help="rollouts per task")
    s.add_argument("--max-steps", type=int, default=None)
    s.add_argument("--p-invert", type=float, default=0.0, help="oracle traces: backward conversion probability")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the per-task table as CSV")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("train", help="pretrain on traces or fine-tune with REINFORCE")
    t.add_argument("--mode", choices=("supervised", "reinforce"), required=True)
    t.add_argument("--domain", required=True)
    t.add_argument("--depth", type=int, default=None)
    t.add_argument("--epochs", type=int, default=1)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--entropy", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--width", type=int, default=64)
    t.add_argument("--traces", type=int, default=1000, help="number of generated traces (supervised)")
    t.add_argument("--traces-file", help="load traces from an NDJSON file instead of generating")
    t.add_argument("--p-invert", type=float, default=0.5)
    t.add_argument("--forward-only", action="store_true")
    t.add_argument("--checkpoint", help="initial parameters")
    t.add_argument("--out", required=True, help="checkpoint to write")
    t.add_argument("--report", help="report CSV (default: checkpoint path with .csv)")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench", help="run a domain benchmark and write results + manifest")
    b.add_argument("domain", choices=("arith24", "doubleadd", "grids"))
    b.add_argument("--mode", choices=("bidir", "fwd", "both"), default="both")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--seeds", help="comma-separated seeds")
    b.add_argument("--config", help="JSON object of config overrides")
    b.add_argument("--manifest", help="rerun exactly from a previous manifest")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen-traces", help="write a trace dataset")
    g.add_argument("--domain", required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--p-invert", type=float, default=0.5)
    g.add_argument("--min-depth", type=int, default=1)
    g.add_argument("--max-depth", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_traces)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
