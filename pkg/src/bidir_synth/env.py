"""Episode wrapper around :class:`SearchGraph`: actions, rewards and masks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import registry_for
from .graph import SearchGraph
from .program import Program, check_solution
from .registry import OperationVariant, Registry, enumerate_operations
from .values import GRID, INT, ExampleTuple, Task

DOMAIN_KIND = {"grid": GRID, "arith24": INT, "doubleadd": INT}


@dataclass(frozen=True)
class EnvConfig:
    domain: str = "arith24"
    R: float = 10.0
    invalid_penalty: float = -1.0
    step_penalty: float = 0.0
    max_steps: int = 15
    forward_only: bool = False
    strict_usage: bool = False

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.domain not in DOMAIN_KIND:
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass(frozen=True)
class Action:
    variant_index: int
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(int(a) for a in self.args))


@dataclass(frozen=True)
class NodeRecord:
    value: ExampleTuple
    grounded: bool
    is_input: bool
    is_output: bool
    used: bool


@dataclass(frozen=True)
class Observation:
    nodes: tuple
    variants: tuple
    step: int
    done: bool = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass
class ActionMask:
    """``op[v]``: variant v has a candidate for every slot.  ``slots[v, j, n]``: node n fits slot j."""

    op: np.ndarray
    slots: np.ndarray
    n_slots: np.ndarray = field(default=None)

    def allows(self, action: Action) -> bool:
        v = action.variant_index
        if not 0 <= v < len(self.op) or not self.op[v]:
            return False
        if len(action.args) != self.n_slots[v]:
            return False
        return all(
            0 <= a < self.slots.shape[2] and self.slots[v, j, a] for j, a in enumerate(action.args)
        )


_SIGNATURES: dict = {}
_TABLES: dict = {}


def _variant_table(registry: Registry, forward_only: bool) -> tuple:
    """One shared variant tuple per (registry, forward_only), so per-table caches hit."""
    hit = _TABLES.get((id(registry), forward_only))
    if hit is not None and hit[0] is registry:
        return hit[1]
    table = tuple(enumerate_operations(registry, forward_only))
    _TABLES[(id(registry), forward_only)] = (registry, table)
    return table


def _signature(variants):
    """Per-table slot requirements ``(kinds[V,S], grounded[V,S], n_slots[V])``, cached by identity."""
    hit = _SIGNATURES.get(id(variants))
    if hit is not None and hit[0] is variants:
        return hit[1]
    n_slots = np.array([len(v.slots()) for v in variants], dtype=np.int64)
    s = int(n_slots.max(initial=0))
    kinds = np.full((len(variants), s), "", dtype=object)
    grounded = np.zeros((len(variants), s), dtype=bool)
    for vi, variant in enumerate(variants):
        for j, (kind, needs_grounded) in enumerate(variant.slots()):
            kinds[vi, j] = kind
            grounded[vi, j] = needs_grounded
    sig = (kinds, grounded, n_slots)
    _SIGNATURES[id(variants)] = (variants, sig)
    return sig


def valid_action_mask(obs: Observation) -> ActionMask:
    """Cheap structural pre-filter: arity, value kind and groundedness."""
    kinds_req, grounded_req, n_slots = _signature(obs.variants)
    kinds = np.array([r.value.kind for r in obs.nodes], dtype=object)
    grounded = np.array([r.grounded for r in obs.nodes], dtype=bool)
    used_slots = np.arange(kinds_req.shape[1])[None, :] < n_slots[:, None]
    if obs.done:
        slots = np.zeros(kinds_req.shape + (len(kinds),), dtype=bool)
    else:
        slots = (
            (kinds_req[:, :, None] == kinds[None, None, :])
            & (grounded_req[:, :, None] == grounded[None, None, :])
            & used_slots[:, :, None]
        )
    op = np.all(slots.any(axis=2) | ~used_slots, axis=1) & (n_slots > 0) & (not obs.done)
    return ActionMask(op, slots, n_slots)


class SynthEnv:
    """One task, one episode at a time."""

    def __init__(self, config: EnvConfig = EnvConfig(), registry: Registry | None = None):
        self.config = config
        self.registry = registry or registry_for(config.domain)
        self.variants = _variant_table(self.registry, config.forward_only)
        self.graph: SearchGraph | None = None
        self.task: Task | None = None
        self.steps = 0
        self.done = True
        self.invalid_actions = 0
        self.episode_return = 0.0
        self.program: Program | None = None

    def reset(self, task: Task) -> Observation:
        kind = DOMAIN_KIND[self.config.domain]
        if task.input_kind != kind or task.output_kind != kind:
            raise ValueError(f"task {task.id!r} does not belong to domain {self.config.domain!r}")
        self.task = task
        self.graph = SearchGraph(task)
        self.steps = 0
        self.invalid_actions = 0
        self.episode_return = 0.0
        self.program = None
        self.done = False
        if self.graph.solved:
            self._finish_solved()
            self.episode_return = self.config.R
        return self.observe()

    @property
    def solved(self) -> bool:
        return self.program is not None

    def _finish_solved(self) -> bool:
        prog = self.graph.extract_program()
        if self.config.strict_usage and not check_solution(prog, self.task, strict_usage=True):
            return False
        self.program = prog
        self.done = True
        return True

    def observe(self) -> Observation:
        g = self.graph
        nodes = tuple(
            NodeRecord(n.value, n.grounded, n.is_input, n.is_output, n.uses > 0) for n in g.nodes
        )
        return Observation(nodes, self.variants, self.steps, self.done)

    def step(self, action: Action):
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        self.steps += 1
        cfg = self.config
        info: dict = {}
        if not 0 <= action.variant_index < len(self.variants):
            outcome_valid, reason = False, "variant index out of range"
        else:
            variant = self.variants[action.variant_index]
            outcome = self.graph.apply_action(variant, action.args)
            outcome_valid, reason = outcome.valid, outcome.reason
        if not outcome_valid:
            self.invalid_actions += 1
            reward = cfg.invalid_penalty
            info["invalid"] = reason
        elif self.graph.solved and self._finish_solved():
            reward = cfg.R
            info["program"] = self.program
        else:
            reward = cfg.step_penalty
        if not self.done and self.steps >= cfg.max_steps:
            self.done = True
        self.episode_return += reward
        return self.observe(), reward, self.done, info


def variant_keys(variants) -> list[str]:
    return [v.key for v in variants]


def variant_index(variants, key: str) -> int:
    for i, v in enumerate(variants):
        if v.key == key:
            return i
    raise KeyError(key)


__all__ = [
    "Action",
    "ActionMask",
    "EnvConfig",
    "NodeRecord",
    "Observation",
    "OperationVariant",
    "SynthEnv",
    "valid_action_mask",
    "variant_index",
    "variant_keys",
]
