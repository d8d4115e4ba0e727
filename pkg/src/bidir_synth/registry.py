"""DSL function definitions with forward, inverse and conditional-inverse semantics.

Every function is applied entry-wise across an :class:`ExampleTuple`.  A
failure on any single example fails the whole application.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .values import DomainError, ExampleTuple


class Direction(enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"
    COND_INVERSE = "cond"


@dataclass(frozen=True, eq=False)
class FunctionDef:
    """A DSL function.

    ``forward(*values) -> value``; ``inverse(out) -> tuple`` of all arguments;
    ``cond_inverses[known] (out, known_values) -> tuple`` of the values at the
    remaining positions, in increasing position order.
    """

    name: str
    arg_kinds: tuple
    out_kind: str
    forward: Callable
    inverse: Callable | None = None
    cond_inverses: Mapping[tuple, Callable] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "arg_kinds", tuple(self.arg_kinds))
        if self.arity < 1:
            raise ValueError(f"{self.name}: arity must be at least 1")
        cond = {}
        for known, fn in dict(self.cond_inverses).items():
            known = tuple(sorted(known))
            if not known or len(known) >= self.arity:
                raise ValueError(f"{self.name}: bad known positions {known}")
            if any(not 0 <= p < self.arity for p in known):
                raise ValueError(f"{self.name}: known position out of range {known}")
            cond[known] = fn
        object.__setattr__(self, "cond_inverses", cond)

    @property
    def arity(self) -> int:
        return len(self.arg_kinds)

    def __repr__(self):
        return f"FunctionDef({self.name})"


@dataclass(frozen=True)
class OperationVariant:
    """A function together with an application direction."""

    function: FunctionDef
    direction: Direction
    known_positions: tuple = ()

    def __post_init__(self):
        f = self.function
        if self.direction is Direction.INVERSE and f.inverse is None:
            raise ValueError(f"{f.name} has no inverse")
        if self.direction is Direction.COND_INVERSE:
            if tuple(self.known_positions) not in f.cond_inverses:
                raise ValueError(f"{f.name} has no cond-inverse for {self.known_positions}")
        elif self.known_positions:
            raise ValueError("known_positions only apply to cond-inverse variants")

    @property
    def key(self) -> str:
        if self.direction is Direction.FORWARD:
            return self.function.name
        if self.direction is Direction.INVERSE:
            return f"{self.function.name}^-1"
        return f"{self.function.name}^-1|{','.join(map(str, self.known_positions))}"

    @property
    def is_backward(self) -> bool:
        return self.direction is not Direction.FORWARD

    @property
    def unknown_positions(self) -> tuple:
        if self.direction is Direction.FORWARD:
            return ()
        return tuple(p for p in range(self.function.arity) if p not in self.known_positions)

    def slots(self) -> tuple:
        """Argument slots as ``(kind, needs_grounded)`` pairs.

        Backward variants take the (ungrounded) output node first, then the
        known arguments in position order.
        """
        f = self.function
        if self.direction is Direction.FORWARD:
            return tuple((k, True) for k in f.arg_kinds)
        return ((f.out_kind, False),) + tuple((f.arg_kinds[p], True) for p in self.known_positions)

    def __repr__(self):
        return f"<{self.key}>"


class Registry:
    """An ordered, immutable collection of DSL functions."""

    def __init__(self, name: str, functions: Sequence[FunctionDef]):
        self.name = name
        self.functions = tuple(functions)
        names = [f.name for f in self.functions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate function names in {name}")
        self._by_name = {f.name: f for f in self.functions}

    def __getitem__(self, name: str) -> FunctionDef:
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    def __iter__(self):
        return iter(self.functions)

    def __repr__(self):
        return f"Registry({self.name}, {[f.name for f in self.functions]})"


def enumerate_operations(registry: Registry, forward_only: bool = False) -> list[OperationVariant]:
    """Forward variants first, then inverses, then cond-inverses; registry order within each."""
    ops = [OperationVariant(f, Direction.FORWARD) for f in registry]
    if forward_only:
        return ops
    ops += [OperationVariant(f, Direction.INVERSE) for f in registry if f.inverse is not None]
    for f in registry:
        for known in sorted(f.cond_inverses):
            ops.append(OperationVariant(f, Direction.COND_INVERSE, known))
    return ops


def _check_kind(t: ExampleTuple, kind: str, what: str):
    if t.kind != kind:
        raise DomainError(f"{what}: expected {kind} values, got {t.kind}")


def _common_length(tuples: Sequence[ExampleTuple]) -> int:
    lengths = {len(t) for t in tuples}
    if len(lengths) != 1:
        raise DomainError(f"example counts differ: {sorted(lengths)}")
    return lengths.pop()


def apply_forward(f: FunctionDef, args: Sequence[ExampleTuple]) -> ExampleTuple:
    if len(args) != f.arity:
        raise DomainError(f"{f.name} takes {f.arity} arguments, got {len(args)}")
    for a, kind in zip(args, f.arg_kinds):
        _check_kind(a, kind, f.name)
    k = _common_length(args)
    out = tuple(f.forward(*(a.entries[i] for a in args)) for i in range(k))
    return ExampleTuple(out)


def apply_inverse(f: FunctionDef, out: ExampleTuple) -> list[ExampleTuple]:
    if f.inverse is None:
        raise DomainError(f"{f.name} is not invertible")
    _check_kind(out, f.out_kind, f.name)
    per_example = [tuple(f.inverse(o)) for o in out.entries]
    for pre in per_example:
        if len(pre) != f.arity:
            raise DomainError(f"{f.name} inverse returned {len(pre)} values")
    for o, pre in zip(out.entries, per_example):
        _confirm(f, pre, o)
    return [ExampleTuple(tuple(pre[p] for pre in per_example)) for p in range(f.arity)]


def _confirm(f: FunctionDef, args: tuple, out) -> None:
    """Deductions must reproduce the output when replayed forward."""
    if f.forward(*args) != out:
        raise DomainError(f"{f.name}: deduced arguments do not reproduce the output")


def apply_cond_inverse(
    f: FunctionDef, out: ExampleTuple, known: Sequence[tuple[int, ExampleTuple]]
) -> list[ExampleTuple]:
    """Deduce the arguments at the positions not listed in ``known``."""
    known = sorted(known, key=lambda pv: pv[0])
    positions = tuple(p for p, _ in known)
    deduce = f.cond_inverses.get(positions)
    if deduce is None:
        raise DomainError(f"{f.name} has no cond-inverse for known positions {positions}")
    _check_kind(out, f.out_kind, f.name)
    for p, t in known:
        _check_kind(t, f.arg_kinds[p], f.name)
    k = _common_length([out] + [t for _, t in known])
    n_unknown = f.arity - len(positions)
    per_example = []
    for i in range(k):
        res = tuple(deduce(out.entries[i], tuple(t.entries[i] for _, t in known)))
        if len(res) != n_unknown:
            raise DomainError(f"{f.name} cond-inverse returned {len(res)} values")
        full = [None] * f.arity
        for (p, t) in known:
            full[p] = t.entries[i]
        for p, v in zip((p for p in range(f.arity) if p not in positions), res):
            full[p] = v
        _confirm(f, tuple(full), out.entries[i])
        per_example.append(res)
    return [ExampleTuple(tuple(r[j] for r in per_example)) for j in range(n_unknown)]
