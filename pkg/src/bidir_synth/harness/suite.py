"""Grid-symmetry task suites.

``CURATED`` holds reconstructed symmetry tasks, each defined by a reference
program and instantiated on seeded random ARC-like grids.  ``gen_symmetry_suite``
samples further tasks from random programs over the six grid operations.
"""
from __future__ import annotations

import numpy as np

from ..dsl import registry_for
from ..program import Program, evaluate, parse_sexpr, size
from ..rng import stream
from ..traces import random_grid, random_tree
from ..values import DomainError, ExampleTuple, Grid, Task, make_task

FOUR_WAY_MIRROR = "(vstack (hstack $0 (flip_h $0)) (flip_v (hstack $0 (flip_h $0))))"

# (task id, reference program, square inputs?)
CURATED = (
    ("task138", "(hstack (hstack (flip_h $0) $0) (hstack (flip_h $0) $0))", False),
    ("mirror-right", "(hstack $0 (flip_h $0))", False),
    ("mirror-left", "(hstack (flip_h $0) $0)", False),
    ("mirror-down", "(vstack $0 (flip_v $0))", False),
    ("mirror-up", "(vstack (flip_v $0) $0)", False),
    ("four-way-mirror", FOUR_WAY_MIRROR, False),
    ("rotate-180", "(rotate_cw (rotate_cw $0))", False),
    ("transpose", "(rotate_cw (flip_v $0))", False),
    ("anti-transpose", "(rotate_ccw (flip_v $0))", False),
    ("tile-horizontal", "(hstack $0 $0)", False),
    ("tile-vertical", "(vstack $0 $0)", False),
    ("tile-2x2", "(vstack (hstack $0 $0) (hstack $0 $0))", False),
    ("tile-triple", "(hstack (hstack $0 $0) $0)", False),
    ("rotate-pair", "(hstack $0 (rotate_cw (rotate_cw $0)))", False),
    ("flip-below", "(vstack $0 (flip_h $0))", False),
    ("flip-beside", "(hstack (flip_v $0) $0)", False),
    ("transpose-below", "(vstack $0 (rotate_cw (flip_v $0)))", True),
    ("rotate-ccw-beside", "(hstack (rotate_ccw $0) $0)", True),
)


def _instantiate(program: Program, rng, n_train: int, n_test: int, side, square: bool, task_id: str) -> Task:
    while True:
        grids = []
        for _ in range(n_train + n_test):
            g = random_grid(rng, side)
            if square:
                n = min(g.shape)
                g = Grid(g.cells[:n, :n])
            grids.append(g)
        outs = evaluate(program, [ExampleTuple(tuple(grids))]).entries
        if all(o != g for o, g in zip(outs, grids)):
            break
    pairs = [((g,), o) for g, o in zip(grids, outs)]
    return make_task(pairs[:n_train], pairs[n_train:], id=task_id)


def curated_suite(seed: int = 0, n_train: int = 3, n_test: int = 1, side=(2, 5)):
    """``[(task, reference_program)]`` for every curated template."""
    reg = registry_for("grid")
    out = []
    for task_id, text, square in CURATED:
        prog = parse_sexpr(text, reg)
        rng = stream(seed, "curated", task_id)
        out.append((_instantiate(prog, rng, n_train, n_test, side, square, task_id), prog))
    return out


def _fingerprint(program: Program, probes: ExampleTuple):
    try:
        return evaluate(program, [probes])
    except DomainError:
        return None


def gen_symmetry_suite(seed: int, count: int, max_depth: int = 4, n_train: int = 3, n_test: int = 1,
                       side=(2, 5), include_four_way: bool = True):
    """``[(task, program)]`` from random programs of depth 1..max_depth.

    Programs are deduplicated by their outputs on a fixed probe set, and
    programs behaving like the identity are skipped.  The first task is a
    four-way mirror when ``include_four_way`` is set.
    """
    reg = registry_for("grid")
    functions = list(reg)
    rng = stream(seed, "symmetry-suite")
    probes = ExampleTuple(tuple(random_grid(stream(seed, "probes", i), (3, 5)) for i in range(4)))
    seen = {probes}
    chosen: list[Program] = []
    if include_four_way and count > 0:
        p = parse_sexpr(FOUR_WAY_MIRROR, reg)
        seen.add(_fingerprint(p, probes))
        chosen.append(p)
    attempts = 0
    while len(chosen) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise RuntimeError(f"could not find {count} distinct grid programs (seed {seed})")
        depth = int(rng.integers(1, max_depth + 1))
        p = random_tree(rng, functions, depth, 1)
        fp = _fingerprint(p, probes)
        if fp is None or fp in seen:
            continue
        seen.add(fp)
        chosen.append(p)
    out = []
    for i, p in enumerate(chosen):
        task_rng = stream(seed, "symmetry-task", i)
        task = _instantiate(p, task_rng, n_train, n_test, side, False, f"sym-{seed}-{i:03d}")
        out.append((task, p))
    return out


def symmetry_benchmark_suite(seed: int = 0, generated: int = 0):
    """Curated tasks followed by ``generated`` sampled ones."""
    suite = curated_suite(seed)
    if generated:
        suite += gen_symmetry_suite(seed, generated)
    return suite


def program_depth(program: Program) -> int:
    return size(program)
