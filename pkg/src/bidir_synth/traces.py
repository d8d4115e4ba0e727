"""Random programs and their bidirectional execution traces.

A trace is built by walking the program from the root: each application is
turned into a backward (inverse or conditional-inverse) action with
probability ``p_invert``.  Once an application stays forward, its whole
subtree is built bottom-up with forward actions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .dsl import registry_for
from .dsl.doubleadd import START_VALUE
from .env import Action, EnvConfig, Observation, SynthEnv
from .graph import SearchGraph
from .program import Call, Input, Program, evaluate, parse_sexpr, subterms
from .registry import Direction, OperationVariant, apply_cond_inverse, enumerate_operations
from .rng import stream
from .values import DomainError, ExampleTuple, Grid, Task, hash_value, make_task

TRACE_FORMAT = "bidir-synth-trace"
TRACE_VERSION = 1


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceGenConfig:
    domain: str = "arith24"
    min_depth: int = 1
    max_depth: int = 4
    p_invert: float = 0.5
    # arith24
    max_value: int = 100
    digit_range: tuple = (1, 9)
    n_digits: int = 4
    # grids
    n_examples: int = 3
    n_test: int = 1
    grid_side: tuple = (3, 6)
    # doubleadd
    target_range: tuple = (3, 10**5)
    max_attempts: int = 100

    def __post_init__(self):
        if not 0.0 <= self.p_invert <= 1.0:
            raise ValueError("p_invert must lie in [0, 1]")
        if self.min_depth < 1 or self.max_depth < self.min_depth:
            raise ValueError("need 1 <= min_depth <= max_depth")


def default_env_config(domain: str, forward_only: bool = False, **kw) -> EnvConfig:
    """Per-domain episode limits: double-and-add chains are long."""
    if domain == "doubleadd" and "max_steps" not in kw:
        kw["max_steps"] = 64
    return EnvConfig(domain=domain, forward_only=forward_only, **kw)


# -- random programs --------------------------------------------------------


def random_grid(rng: np.random.Generator, side=(3, 6)) -> Grid:
    h, w = (int(x) for x in rng.integers(side[0], side[1] + 1, size=2))
    density = rng.uniform(0.25, 0.7)
    palette = rng.choice(np.arange(1, 10), size=int(rng.integers(1, 4)), replace=False)
    cells = np.where(rng.random((h, w)) < density, rng.choice(palette, size=(h, w)), 0)
    return Grid(cells)


def random_tree(rng: np.random.Generator, functions, n_ops: int, n_inputs: int) -> Program:
    """A uniformly-shaped random tree with exactly ``n_ops`` applications."""
    if n_ops == 0:
        return Input(int(rng.integers(n_inputs)))
    f = functions[int(rng.integers(len(functions)))]
    if f.arity == 1:
        return Call(f, (random_tree(rng, functions, n_ops - 1, n_inputs),))
    left = int(rng.integers(n_ops))
    return Call(
        f,
        (
            random_tree(rng, functions, left, n_inputs),
            random_tree(rng, functions, n_ops - 1 - left, n_inputs),
        ),
    )


def doubleadd_program(target: int, registry) -> Program:
    """The shortest add_one/double chain from 2, read off the binary digits of ``target``."""
    if target < START_VALUE:
        raise ValueError("targets below 2 are unreachable")
    bits = bin(target)[2:]
    prog: Program = Input(0)
    if bits[1] == "1":
        prog = Call(registry["add_one"], (prog,))
    for b in bits[2:]:
        prog = Call(registry["double"], (prog,))
        if b == "1":
            prog = Call(registry["add_one"], (prog,))
    return prog


def doubleadd_task(target: int) -> Task:
    return make_task([((START_VALUE,), target)], id=f"doubleadd-{target}")


def gen_random_program(config: TraceGenConfig, rng: np.random.Generator, depth: int | None = None):
    """Sample ``(program, task)``; rejection-samples programs that fail or are trivial."""
    extra = {"max_value": config.max_value} if config.domain == "arith24" else {}
    registry = registry_for(config.domain, **extra)
    if config.domain == "doubleadd":
        lo, hi = config.target_range
        target = int(rng.integers(lo, hi + 1))
        return doubleadd_program(target, registry), doubleadd_task(target)
    functions = list(registry)
    if depth is None:
        depth = int(rng.integers(config.min_depth, config.max_depth + 1))
    for _ in range(config.max_attempts):
        if config.domain == "arith24":
            lo, hi = config.digit_range
            digits = tuple(int(d) for d in rng.integers(lo, hi + 1, size=config.n_digits))
            prog = random_tree(rng, functions, depth, config.n_digits)
            try:
                values = evaluate(prog, [ExampleTuple((d,)) for d in digits])
            except DomainError:
                continue
            target = values.entries[0]
            if target in digits:
                continue
            tid = "arith-" + "-".join(map(str, digits)) + f"-{target}"
            return prog, make_task([(digits, target)], id=tid)
        prog = random_tree(rng, functions, depth, 1)
        grids = [random_grid(rng, config.grid_side) for _ in range(config.n_examples + config.n_test)]
        try:
            outs = evaluate(prog, [ExampleTuple(tuple(grids))]).entries
        except DomainError:
            continue
        if any(o == g for o, g in zip(outs, grids)):
            continue
        pairs = [((g,), o) for g, o in zip(grids, outs)]
        tid = "grid-" + hash_value(ExampleTuple(tuple(grids) + tuple(outs)))[:12]
        task = make_task(pairs[: config.n_examples], pairs[config.n_examples :], id=tid)
        return prog, task
    raise GenerationError(
        f"no valid {config.domain} program of depth {depth} after {config.max_attempts} attempts"
    )


# -- traces -----------------------------------------------------------------


@dataclass
class Trace:
    task: Task
    actions: list
    observations: list = field(default_factory=list)
    program: Program | None = None
    seed: int | None = None

    @property
    def steps(self) -> list[tuple[Observation, Action]]:
        return list(zip(self.observations, self.actions))

    def __len__(self):
        return len(self.actions)


def replay(task: Task, actions: Iterable[Action], env_config: EnvConfig):
    """Run actions through a fresh environment; returns (observations, rewards, env)."""
    env = SynthEnv(env_config)
    obs = env.reset(task)
    observations, rewards = [], []
    for a in actions:
        if env.done:
            raise ValueError("trace continues past the end of the episode")
        observations.append(obs)
        obs, r, _, _ = env.step(a)
        rewards.append(r)
    return observations, rewards, env


class _Builder:
    def __init__(self, program: Program, task: Task, variants, p_invert: float, rng):
        self.graph = SearchGraph(task)
        self.values = {}
        inputs = task.input_tuples()
        for t in subterms(program):
            if t not in self.values:
                self.values[t] = evaluate(t, inputs)
        self.index = {v.key: i for i, v in enumerate(variants)}
        self.p = p_invert
        self.rng = rng
        self.actions: list[Action] = []

    def node(self, term):
        return self.graph.node_for(self.values[term])

    def done(self, term) -> bool:
        n = self.node(term)
        return self.graph.solved or (n is not None and n.grounded)

    def apply(self, variant: OperationVariant, args) -> bool:
        out = self.graph.apply_action(variant, args)
        if out.valid:
            self.actions.append(Action(self.index[variant.key], tuple(args)))
        return out.valid

    def forward(self, term):
        if self.done(term):
            return
        for a in term.args:
            self.forward(a)
        # an argument may already have produced this value (e.g. x * 1 = x)
        if self.done(term):
            return
        args = [self.node(a).id for a in term.args]
        if not self.apply(OperationVariant(term.function, Direction.FORWARD), args):
            raise GenerationError(f"forward step {term} rejected")

    def resolve(self, term):
        """Ground an ungrounded node, backwards where allowed."""
        if self.done(term):
            return
        f = term.function
        if self.rng.random() < self.p:
            node_id = self.node(term).id
            if f.inverse is not None:
                if self.apply(OperationVariant(f, Direction.INVERSE), [node_id]):
                    for a in term.args:
                        self.resolve(a)
                    return
            elif f.cond_inverses:
                known = self._pick_known(term)
                if known is not None:
                    for p in known:
                        self.forward(term.args[p])
                    if self.done(term):
                        return
                    args = [node_id] + [self.node(term.args[p]).id for p in known]
                    if self.apply(OperationVariant(f, Direction.COND_INVERSE, known), args):
                        for p in range(f.arity):
                            if p not in known:
                                self.resolve(term.args[p])
                        return
        self.forward(term)

    def _pick_known(self, term):
        f = term.function
        qualifying = []
        for known in sorted(f.cond_inverses):
            try:
                deduced = apply_cond_inverse(
                    f, self.values[term], [(p, self.values[term.args[p]]) for p in known]
                )
            except DomainError:
                continue
            unknown = [p for p in range(f.arity) if p not in known]
            if all(d == self.values[term.args[p]] for d, p in zip(deduced, unknown)):
                qualifying.append(known)
        # left operand as the known one when both qualify
        return qualifying[0] if qualifying else None


def program_to_bidir_trace(
    program: Program,
    task: Task,
    p_invert: float,
    rng: np.random.Generator,
    env_config: EnvConfig | None = None,
) -> Trace:
    env_config = env_config or default_env_config(_domain_of(task))
    registry = registry_for(env_config.domain)
    variants = enumerate_operations(registry, env_config.forward_only)
    # programs may come from a different registry instance; rebind by name
    program = _rebind(program, registry)
    b = _Builder(program, task, variants, 0.0 if env_config.forward_only else p_invert, rng)
    if not b.graph.solved:
        b.resolve(program)
    if not b.graph.solved:
        raise GenerationError(f"trace for {program} did not solve its task")
    observations, rewards, env = replay(task, b.actions, env_config)
    if not env.solved or env.invalid_actions:
        raise GenerationError(f"trace for {program} failed replay validation")
    return Trace(task, b.actions, observations, program)


def _rebind(program: Program, registry) -> Program:
    if isinstance(program, Input):
        return program
    return Call(registry[program.function.name], tuple(_rebind(a, registry) for a in program.args))


def _domain_of(task: Task) -> str:
    if task.input_kind == "grid":
        return "grid"
    if task.n_inputs == 1 and task.train[0].inputs[0] == START_VALUE:
        return "doubleadd"
    return "arith24"


def gen_trace(config: TraceGenConfig, rng: np.random.Generator, env_config: EnvConfig | None = None,
              depth: int | None = None) -> Trace:
    env_config = env_config or default_env_config(config.domain)
    program, task = gen_random_program(config, rng, depth)
    return program_to_bidir_trace(program, task, config.p_invert, rng, env_config)


def gen_dataset(config: TraceGenConfig, count: int, seed: int = 0, env_config: EnvConfig | None = None) -> list[Trace]:
    """``count`` replay-validated traces; trace ``i`` depends only on (seed, i)."""
    env_config = env_config or default_env_config(config.domain)
    traces = []
    for i in range(count):
        rng = stream(seed, "trace", config.domain, i)
        t = gen_trace(config, rng, env_config)
        t.seed = seed
        traces.append(t)
    return traces


def backward_fraction(traces: Iterable[Trace]) -> float:
    n = back = 0
    for t in traces:
        for obs, a in t.steps:
            n += 1
            back += obs.variants[a.variant_index].is_backward
    return back / max(n, 1)


# -- serialization ----------------------------------------------------------


def trace_to_record(trace: Trace, domain: str) -> dict:
    from .harness.formats import task_to_json

    variants = trace.observations[0].variants if trace.observations else ()
    return {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "domain": domain,
        "seed": trace.seed,
        "task": task_to_json(trace.task),
        "program": None if trace.program is None else str(trace.program),
        "actions": [
            {"variant": variants[a.variant_index].key, "args": list(a.args)} for a in trace.actions
        ],
    }


def record_to_trace(record: dict, env_config: EnvConfig | None = None) -> Trace:
    from .harness.formats import task_from_json

    if record.get("format") != TRACE_FORMAT or record.get("version") != TRACE_VERSION:
        raise ValueError(f"unsupported trace record {record.get('format')}/{record.get('version')}")
    domain = record["domain"]
    env_config = env_config or default_env_config(domain)
    task = task_from_json(record["task"])
    registry = registry_for(domain)
    variants = enumerate_operations(registry, env_config.forward_only)
    keys = {v.key: i for i, v in enumerate(variants)}
    actions = [Action(keys[a["variant"]], tuple(a["args"])) for a in record["actions"]]
    observations, _, _ = replay(task, actions, env_config)
    program = parse_sexpr(record["program"], registry) if record.get("program") else None
    return Trace(task, actions, observations, program, record.get("seed"))


def save_traces(traces: Iterable[Trace], path, domain: str) -> None:
    with open(path, "w") as fh:
        for t in traces:
            fh.write(json.dumps(trace_to_record(t, domain), separators=(",", ":")) + "\n")


def load_traces(path, env_config: EnvConfig | None = None) -> list[Trace]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(record_to_trace(json.loads(line), env_config))
    return out
