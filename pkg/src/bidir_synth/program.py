"""Expression trees over DSL functions and input references."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .registry import FunctionDef, apply_forward
from .values import DomainError, ExampleTuple, Task


@dataclass(frozen=True)
class Input:
    index: int

    def __str__(self):
        return f"${self.index}"


@dataclass(frozen=True)
class Call:
    function: FunctionDef
    args: tuple

    def __str__(self):
        return "(" + " ".join([self.function.name] + [str(a) for a in self.args]) + ")"


Program = Input | Call


def size(program: Program) -> int:
    """Number of function applications (shared subterms counted once per use)."""
    if isinstance(program, Input):
        return 0
    return 1 + sum(size(a) for a in program.args)


def input_refs(program: Program) -> list[int]:
    if isinstance(program, Input):
        return [program.index]
    return [i for a in program.args for i in input_refs(a)]


def subterms(program: Program) -> list[Program]:
    """All subterms, children before parents."""
    if isinstance(program, Input):
        return [program]
    out = []
    for a in program.args:
        out += subterms(a)
    out.append(program)
    return out


def evaluate(program: Program, inputs: Sequence[ExampleTuple]) -> ExampleTuple:
    """Evaluate on tuple-valued inputs.  Raises DomainError on failure."""
    cache: dict = {}

    def go(p):
        if p in cache:
            return cache[p]
        if isinstance(p, Input):
            v = inputs[p.index]
        else:
            v = apply_forward(p.function, [go(a) for a in p.args])
        cache[p] = v
        return v

    return go(program)


def run(program: Program, inputs: Sequence) -> object:
    """Evaluate on a single example's raw input values."""
    out = evaluate(program, [ExampleTuple((v,)) for v in inputs])
    return out.entries[0]


def check_solution(program: Program, task: Task, strict_usage: bool = False) -> bool:
    """True iff the program reproduces every train and every labelled test output.

    With ``strict_usage`` each input must also be referenced exactly once.
    """
    if strict_usage and sorted(input_refs(program)) != list(range(task.n_inputs)):
        return False
    for ex in task.train + task.test:
        if ex.output is None:
            continue
        try:
            if run(program, ex.inputs) != ex.output:
                return False
        except DomainError:
            return False
    return True


def parse_sexpr(text: str, registry) -> Program:
    """Parse the pretty-printed form, e.g. ``(hstack (flip_h $0) $0)``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def go():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok.startswith("$"):
            return Input(int(tok[1:]))
        if tok != "(":
            raise ValueError(f"unexpected token {tok!r}")
        f = registry[tokens[pos]]
        pos += 1
        args = []
        while tokens[pos] != ")":
            args.append(go())
        pos += 1
        if len(args) != f.arity:
            raise ValueError(f"{f.name} takes {f.arity} arguments, got {len(args)}")
        return Call(f, tuple(args))

    prog = go()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in {text!r}")
    return prog
