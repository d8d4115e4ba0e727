"""Exhaustive meet-in-the-middle search in the graph, and a brute-force 24-Game solver.

``bidirectional_closure`` grows a search graph forward with every action whose
result costs at most ``max_cost - 1`` applications, then closes the gap from
the output with one backward (inverse or conditional-inverse) step, applying
the candidate that completes the cheapest program first.  ``brute_force_values``
is an independent forward enumerator sharing no code with the graph.
"""
from __future__ import annotations

from itertools import combinations_with_replacement

from .graph import SearchGraph
from .program import Program, size
from .registry import Direction, Registry, apply_cond_inverse, apply_inverse, enumerate_operations
from .values import DomainError, Task, make_task


def bidirectional_closure(task: Task, registry: Registry, max_cost: int) -> Program | None:
    """Cheapest program of at most ``max_cost`` applications, found in the graph, or None.

    Every program of size ``c ≤ max_cost`` is ``f(a_1..a_n)`` with each
    argument of size ``≤ c - 1``; the forward phase grounds all such
    arguments, and the backward step deduces the missing ones from the output
    and the known ones.  Candidates are applied in order of the size of the
    program they complete, because the first meeting grounds the output.
    """
    g = SearchGraph(task)
    if g.solved:
        return g.extract_program()
    variants = enumerate_operations(registry)
    fwd = [v for v in variants if v.direction is Direction.FORWARD]
    back = [v for v in variants if v.direction is not Direction.FORWARD]
    changed = True
    while changed and not g.solved:
        changed = False
        cost = g.derivation_costs()[0]
        for v in fwd:
            for args in _bounded_args(cost, v.function.arity, max_cost - 2):
                changed |= g.apply_action(v, args).valid
    if not g.solved:
        cost = g.derivation_costs()[0]
        out = g.nodes[g.output_node_id].value
        candidates = []
        for order, v in enumerate(back):
            for known in _bounded_args(cost, len(v.known_positions), max_cost - 1):
                try:
                    if v.direction is Direction.INVERSE:
                        targets = apply_inverse(v.function, out)
                    else:
                        targets = apply_cond_inverse(
                            v.function, out, [(p, g.nodes[k].value) for p, k in zip(v.known_positions, known)]
                        )
                except DomainError:
                    continue
                met = [g.node_for(t) for t in targets]
                if any(n is None or not n.grounded for n in met):
                    continue
                total = 1 + sum(cost[k] for k in known) + sum(cost[n.id] for n in met)
                candidates.append((total, order, known, v))
        for total, _, known, v in sorted(candidates, key=lambda c: c[:3]):
            if total <= max_cost and g.apply_action(v, (g.output_node_id,) + known).valid:
                break
    if not g.solved:
        return None
    costs, _ = g.derivation_costs()
    if costs[g.output_node_id] > max_cost:
        return None
    prog = g.extract_program()
    assert size(prog) == costs[g.output_node_id]
    return prog


def _bounded_args(cost: dict, arity: int, budget: int):
    """Argument tuples of grounded nodes whose costs sum to at most ``budget``."""
    if budget < 0:
        return
    nodes = sorted(cost, key=lambda n: (cost[n], n))
    if arity == 0:
        yield ()
        return
    for n in nodes:
        if cost[n] > budget:
            break
        for rest in _bounded_args(cost, arity - 1, budget - cost[n]):
            yield (n,) + rest


# -- independent 24-Game oracle -------------------------------------------------------


def _combine(a: int, b: int, max_value: int):
    out = {a + b, a * b}
    if a >= b:
        out.add(a - b)
    if b != 0 and a % b == 0:
        out.add(a // b)
    return {x for x in out if 0 <= x <= max_value}


def brute_force_values(digits, max_ops: int = 3, max_value: int = 100) -> dict[int, int]:
    """Every value reachable from ``digits`` (reusable) with at most ``max_ops``
    applications of + − × ÷, mapped to the fewest applications needed."""
    by_cost: list[set[int]] = [set(digits)]
    for c in range(1, max_ops + 1):
        level = set()
        for i in range(c):
            j = c - 1 - i
            for a in by_cost[i]:
                for b in by_cost[j]:
                    level |= _combine(a, b, max_value)
        by_cost.append(level)
    best: dict[int, int] = {}
    for c, level in enumerate(by_cost):
        for x in level:
            best.setdefault(x, c)
    return best


def brute_force_solvable(digits, target: int = 24, max_ops: int = 3, max_value: int = 100) -> bool:
    return target in brute_force_values(digits, max_ops, max_value)


def digit_multisets(n: int = 4, lo: int = 1, hi: int = 9):
    """All multisets of ``n`` digits in ``lo..hi`` (495 for the defaults)."""
    return list(combinations_with_replacement(range(lo, hi + 1), n))


def game24_task(digits, target: int = 24) -> Task:
    return make_task([(tuple(digits), target)], id="24-" + "".join(map(str, digits)))
