"""Concrete values (grids and non-negative integers) and per-example tuples.

A search-graph node never stores a single value: it stores one value per
training example of the task, packed into an :class:`ExampleTuple`.  Two
nodes are the same node exactly when their tuples are equal.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

MAX_GRID_SIDE = 30
NUM_COLORS = 10

GRID = "grid"
INT = "int"


class DomainError(ValueError):
    """A function is undefined on the values it was given."""


def validate_color(code: int) -> int:
    if not 0 <= int(code) < NUM_COLORS:
        raise ValueError(f"color {code} outside 0..{NUM_COLORS - 1}")
    return int(code)


class Grid:
    """Immutable rectangular grid of colors 0-9, at most 30x30."""

    __slots__ = ("cells", "_key", "_hash")

    def __init__(self, cells):
        arr = np.array(cells, dtype=np.int16)
        if arr.ndim != 2:
            raise ValueError(f"grid must be 2-dimensional, got shape {arr.shape}")
        h, w = arr.shape
        if not (1 <= h <= MAX_GRID_SIDE and 1 <= w <= MAX_GRID_SIDE):
            raise ValueError(f"grid shape {arr.shape} outside 1..{MAX_GRID_SIDE}")
        if arr.min() < 0 or arr.max() >= NUM_COLORS:
            raise ValueError("grid colors must lie in 0..9")
        arr = arr.astype(np.uint8)
        arr.flags.writeable = False
        self.cells = arr
        self._key = bytes((h, w)) + arr.tobytes()
        self._hash = hash(self._key)

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> "Grid":
        # Skips color validation: used by grid ops whose outputs only permute cells.
        h, w = arr.shape
        if not (1 <= h <= MAX_GRID_SIDE and 1 <= w <= MAX_GRID_SIDE):
            raise DomainError(f"grid shape {arr.shape} outside 1..{MAX_GRID_SIDE}")
        g = object.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        arr.flags.writeable = False
        g.cells = arr
        g._key = bytes((h, w)) + arr.tobytes()
        g._hash = hash(g._key)
        return g

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def tolist(self) -> list[list[int]]:
        return self.cells.tolist()

    def __eq__(self, other):
        return isinstance(other, Grid) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Grid({self.tolist()})"


Value = Union[Grid, int]


def kind_of(value) -> str:
    if isinstance(value, Grid):
        return GRID
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return INT
    raise TypeError(f"not a DSL value: {value!r}")


def make_int(n) -> int:
    """Validate a non-negative integer value."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"expected an integer, got {n!r}")
    if n < 0:
        raise ValueError(f"integer values must be non-negative, got {n}")
    return int(n)


def as_value(raw) -> Value:
    """Coerce a JSON-ish object (int or nested lists) into a value."""
    if isinstance(raw, Grid):
        return raw
    if isinstance(raw, (int, np.integer)) and not isinstance(raw, bool):
        return make_int(raw)
    return Grid(raw)


@dataclass(frozen=True, eq=False)
class ExampleTuple:
    """One abstract value, instantiated once per training example."""

    entries: tuple
    kind: str = field(init=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("an ExampleTuple needs at least one entry")
        kinds = {kind_of(e) for e in entries}
        if len(kinds) != 1:
            raise ValueError(f"mixed value kinds in tuple: {sorted(kinds)}")
        kind = kinds.pop()
        if kind == INT:
            entries = tuple(make_int(e) for e in entries)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def of(cls, *entries) -> "ExampleTuple":
        return cls(tuple(as_value(e) for e in entries))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __eq__(self, other):
        return (
            isinstance(other, ExampleTuple)
            and self.kind == other.kind
            and self.entries == other.entries
        )

    def __hash__(self):
        return hash((self.kind, self.entries))

    def __repr__(self):
        if self.kind == INT:
            return f"ExampleTuple({list(self.entries)})"
        return f"ExampleTuple({[g.tolist() for g in self.entries]})"


def values_equal(a: ExampleTuple, b: ExampleTuple) -> bool:
    return a == b


def _encode(value) -> bytes:
    if isinstance(value, Grid):
        return b"G" + value._key
    n = int(value)
    return b"I" + n.to_bytes(max(1, (n.bit_length() + 7) // 8), "little") + b";"


def hash_value(v: ExampleTuple) -> str:
    """Content digest, stable across processes (unlike the builtin ``hash``)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(v.kind.encode())
    h.update(len(v.entries).to_bytes(2, "little"))
    for e in v.entries:
        h.update(_encode(e))
    return h.hexdigest()


@dataclass(frozen=True)
class Example:
    """One input/output pair.  ``inputs`` has one value per input slot."""

    inputs: tuple
    output: Value | None = None


@dataclass(frozen=True)
class Task:
    """A few-shot task: train pairs drive the search, test pairs check it."""

    train: tuple
    test: tuple = ()
    id: str = "task"

    def __post_init__(self):
        train = tuple(self.train)
        test = tuple(self.test)
        if not train:
            raise ValueError(f"task {self.id!r} has no training examples")
        n_inputs = len(train[0].inputs)
        if n_inputs < 1:
            raise ValueError(f"task {self.id!r} has no inputs")
        for ex in train + test:
            if len(ex.inputs) != n_inputs:
                raise ValueError(f"task {self.id!r}: inconsistent input count")
        in_kinds = {kind_of(v) for ex in train + test for v in ex.inputs}
        out_kinds = {kind_of(ex.output) for ex in train + test if ex.output is not None}
        if any(ex.output is None for ex in train):
            raise ValueError(f"task {self.id!r}: training outputs may not be withheld")
        if len(in_kinds) != 1 or len(out_kinds) != 1:
            raise ValueError(f"task {self.id!r}: inputs/outputs must share one kind each")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)

    @property
    def n_inputs(self) -> int:
        return len(self.train[0].inputs)

    @property
    def input_kind(self) -> str:
        return kind_of(self.train[0].inputs[0])

    @property
    def output_kind(self) -> str:
        return kind_of(self.train[0].output)

    def input_tuples(self) -> list[ExampleTuple]:
        return [
            ExampleTuple(tuple(ex.inputs[j] for ex in self.train))
            for j in range(self.n_inputs)
        ]

    def output_tuple(self) -> ExampleTuple:
        return ExampleTuple(tuple(ex.output for ex in self.train))


def make_task(train: Iterable, test: Iterable = (), id: str = "task") -> Task:
    """Build a task from ``(inputs, output)`` pairs of raw values.

    ``inputs`` may be a single raw value or a tuple of them.
    """

    def conv(pairs: Sequence) -> tuple:
        out = []
        for inputs, output in pairs:
            if not isinstance(inputs, tuple):
                inputs = (inputs,)
            out.append(
                Example(
                    tuple(as_value(v) for v in inputs),
                    None if output is None else as_value(output),
                )
            )
        return tuple(out)

    return Task(conv(list(train)), conv(list(test)), id)
