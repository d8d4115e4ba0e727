"""Double-and-add: reach a target from the constant 2 with add_one and double."""
from __future__ import annotations

from dataclasses import dataclass

from ..registry import FunctionDef, Registry
from ..values import INT, DomainError

START_VALUE = 2


@dataclass(frozen=True)
class DoubleAddConfig:
    start_value: int = START_VALUE
    max_value: int = 10**7

    def __post_init__(self):
        if self.start_value != START_VALUE:
            raise ValueError("double-and-add always starts from 2")


def add_one(n: int, max_value: int = 10**7) -> int:
    if n + 1 > max_value:
        raise DomainError(f"{n} + 1 exceeds {max_value}")
    return n + 1


def sub_one(n: int) -> int:
    if n < 1:
        raise DomainError(f"{n} has no predecessor")
    return n - 1


def double(n: int, max_value: int = 10**7) -> int:
    if 2 * n > max_value:
        raise DomainError(f"2 * {n} exceeds {max_value}")
    return 2 * n


def halve(n: int) -> int:
    if n % 2:
        raise DomainError(f"{n} is odd")
    return n // 2


def doubleadd_registry(config: DoubleAddConfig = DoubleAddConfig()) -> Registry:
    m = config.max_value
    return Registry(
        "doubleadd",
        [
            FunctionDef("add_one", (INT,), INT, lambda n: add_one(n, m), inverse=lambda n: (sub_one(n),)),
            FunctionDef("double", (INT,), INT, lambda n: double(n, m), inverse=lambda n: (halve(n),)),
        ],
    )
