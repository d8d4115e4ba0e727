"""24-Game arithmetic: + - * / over non-negative integers capped at ``max_value``."""
from __future__ import annotations

from dataclasses import dataclass

from ..registry import FunctionDef, Registry
from ..values import INT, DomainError

OPS = ("+", "-", "*", "/")
OP_NAMES = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


@dataclass(frozen=True)
class ArithConstraints:
    max_value: int = 100
    allow_negative: bool = False
    allow_nonintegral: bool = False

    def __post_init__(self):
        if self.allow_negative or self.allow_nonintegral:
            raise ValueError("only non-negative integral arithmetic is supported")
        if self.max_value < 0:
            raise ValueError("max_value must be non-negative")

    def check(self, n: int) -> int:
        if n < 0:
            raise DomainError(f"{n} is negative")
        if n > self.max_value:
            raise DomainError(f"{n} exceeds {self.max_value}")
        return n


def arith_forward(op: str, a: int, b: int, constraints: ArithConstraints = ArithConstraints()) -> int:
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0 or a % b:
            raise DomainError(f"{a} / {b} is not an exact division")
        r = a // b
    else:
        raise ValueError(f"unknown operator {op!r}")
    return constraints.check(r)


def arith_cond_inverse(
    op: str, out: int, known: int, known_position: int, constraints: ArithConstraints = ArithConstraints()
) -> int:
    """Solve ``known op x = out`` (position 0) or ``x op known = out`` (position 1)."""
    if known_position not in (0, 1):
        raise ValueError("known_position must be 0 or 1")
    if op == "+":
        x = out - known
    elif op == "-":
        x = known - out if known_position == 0 else out + known
    elif op == "*":
        # known * x = 0 with known = 0 has no unique solution
        if known == 0 or out % known:
            raise DomainError(f"{out} is not a multiple of {known}")
        x = out // known
    elif op == "/":
        if known_position == 0:
            # known / x = out
            if out == 0 or known == 0 or known % out:
                raise DomainError(f"{known} / x = {out} has no unique integral solution")
            x = known // out
        else:
            # x / known = out
            if known == 0:
                raise DomainError("division by zero")
            x = out * known
    else:
        raise ValueError(f"unknown operator {op!r}")
    return constraints.check(x)


def arith_registry(constraints: ArithConstraints = ArithConstraints()) -> Registry:
    def make(op):
        def fwd(a, b):
            return arith_forward(op, a, b, constraints)

        def cond(pos):
            return lambda out, known: (arith_cond_inverse(op, out, known[0], pos, constraints),)

        return FunctionDef(
            OP_NAMES[op], (INT, INT), INT, fwd, cond_inverses={(0,): cond(0), (1,): cond(1)}
        )

    return Registry("arith24", [make(op) for op in OPS])


SYMBOLS = {v: k for k, v in OP_NAMES.items()}
