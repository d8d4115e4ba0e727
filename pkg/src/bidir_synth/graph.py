"""Bidirectional search graph over hash-consed example tuples.

Grounded nodes have a known program over the task inputs.  Backward edges
record the obligation "grounding every target grounds the output"; a forward
result that collides with an ungrounded node grounds it, which is how the two
search directions meet.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .program import Call, Input, Program
from .registry import (
    Direction,
    OperationVariant,
    apply_cond_inverse,
    apply_forward,
    apply_inverse,
)
from .values import DomainError, ExampleTuple, Task


@dataclass
class ValueNode:
    id: int
    value: ExampleTuple
    grounded: bool
    is_input: bool = False
    is_output: bool = False
    input_index: int | None = None
    # number of edges naming this node as an argument or as a backward output
    uses: int = 0


@dataclass
class OpEdge:
    id: int
    variant: OperationVariant
    arg_node_ids: tuple
    out_node_id: int
    target_node_ids: tuple = ()
    satisfied: bool = False

    @property
    def function(self):
        return self.variant.function

    @property
    def direction(self) -> Direction:
        return self.variant.direction


@dataclass
class StepOutcome:
    valid: bool
    reason: str | None = None
    new_node_ids: list = field(default_factory=list)
    newly_grounded: list = field(default_factory=list)
    edge_id: int | None = None
    solved: bool = False


class SearchGraph:
    def __init__(self, task: Task):
        self.task = task
        self.nodes: list[ValueNode] = []
        self.edges: list[OpEdge] = []
        self._index: dict[ExampleTuple, int] = {}
        self._edge_keys: set = set()
        self._waiting: dict[int, list[int]] = {}  # target node -> backward edges
        self.input_node_ids: list[int] = []
        for j, t in enumerate(task.input_tuples()):
            nid = self._index.get(t)
            if nid is None:
                nid = self._add_node(t, grounded=True)
                node = self.nodes[nid]
                node.is_input = True
                node.input_index = j
            self.input_node_ids.append(nid)
        out = task.output_tuple()
        nid = self._index.get(out)
        if nid is None:
            nid = self._add_node(out, grounded=False)
        self.nodes[nid].is_output = True
        self.output_node_id = nid

    # -- queries -------------------------------------------------------------

    @property
    def solved(self) -> bool:
        return self.nodes[self.output_node_id].grounded

    @property
    def grounded_set(self) -> set[int]:
        return {n.id for n in self.nodes if n.grounded}

    def node_for(self, value: ExampleTuple) -> ValueNode | None:
        nid = self._index.get(value)
        return None if nid is None else self.nodes[nid]

    def __len__(self):
        return len(self.nodes)

    # -- mutation ------------------------------------------------------------

    def _add_node(self, value: ExampleTuple, grounded: bool) -> int:
        nid = len(self.nodes)
        self.nodes.append(ValueNode(nid, value, grounded))
        self._index[value] = nid
        return nid

    def _intern(self, value: ExampleTuple, grounded: bool, outcome: StepOutcome) -> int:
        nid = self._index.get(value)
        if nid is None:
            nid = self._add_node(value, grounded)
            outcome.new_node_ids.append(nid)
            if grounded:
                outcome.newly_grounded.append(nid)
        elif grounded and not self.nodes[nid].grounded:
            outcome.newly_grounded += self.propagate_grounding(nid)
        return nid

    def check_action(self, variant: OperationVariant, arg_node_ids: Sequence[int]) -> str | None:
        """Structural validity; returns the reason an action is invalid, or None."""
        slots = variant.slots()
        if len(arg_node_ids) != len(slots):
            return "arity"
        for nid, (kind, needs_grounded) in zip(arg_node_ids, slots):
            if not isinstance(nid, int) or not 0 <= nid < len(self.nodes):
                return "node id out of range"
            node = self.nodes[nid]
            if node.value.kind != kind:
                return "kind"
            if node.grounded != needs_grounded:
                return "groundedness"
        if (variant.key, tuple(arg_node_ids)) in self._edge_keys:
            return "duplicate edge"
        return None

    def apply_action(self, variant: OperationVariant, arg_node_ids: Sequence[int]) -> StepOutcome:
        """Apply one operation; an invalid action leaves the graph untouched."""
        arg_node_ids = tuple(arg_node_ids)
        reason = self.check_action(variant, arg_node_ids)
        if reason is not None:
            return StepOutcome(False, reason)
        f = variant.function
        try:
            if variant.direction is Direction.FORWARD:
                result = apply_forward(f, [self.nodes[i].value for i in arg_node_ids])
            elif variant.direction is Direction.INVERSE:
                targets = apply_inverse(f, self.nodes[arg_node_ids[0]].value)
            else:
                known = [
                    (p, self.nodes[i].value)
                    for p, i in zip(variant.known_positions, arg_node_ids[1:])
                ]
                targets = apply_cond_inverse(f, self.nodes[arg_node_ids[0]].value, known)
        except DomainError as e:
            return StepOutcome(False, f"domain: {e}")

        outcome = StepOutcome(True)
        self._edge_keys.add((variant.key, arg_node_ids))
        eid = len(self.edges)
        outcome.edge_id = eid
        if variant.direction is Direction.FORWARD:
            out_id = self._intern(result, True, outcome)
            edge = OpEdge(eid, variant, arg_node_ids, out_id, (), True)
            self.edges.append(edge)
            for i in arg_node_ids:
                self.nodes[i].uses += 1
        else:
            out_id = arg_node_ids[0]
            target_ids = tuple(self._intern(t, False, outcome) for t in targets)
            full = [None] * f.arity
            for p, i in zip(variant.known_positions, arg_node_ids[1:]):
                full[p] = i
            for p, i in zip(variant.unknown_positions, target_ids):
                full[p] = i
            edge = OpEdge(eid, variant, tuple(full), out_id, target_ids)
            self.edges.append(edge)
            for i in arg_node_ids:
                self.nodes[i].uses += 1
            for t in set(target_ids):
                self._waiting.setdefault(t, []).append(eid)
            if all(self.nodes[t].grounded for t in target_ids):
                edge.satisfied = True
                if not self.nodes[out_id].grounded:
                    outcome.newly_grounded += self.propagate_grounding(out_id)
        outcome.solved = self.solved
        return outcome

    def propagate_grounding(self, node_id: int) -> list[int]:
        """Ground ``node_id`` and everything that follows from it; returns the flipped nodes."""
        flipped = []
        stack = [node_id]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            if node.grounded:
                continue
            node.grounded = True
            flipped.append(nid)
            for eid in self._waiting.get(nid, ()):
                edge = self.edges[eid]
                if edge.satisfied:
                    continue
                if all(self.nodes[t].grounded for t in edge.target_node_ids):
                    edge.satisfied = True
                    if not self.nodes[edge.out_node_id].grounded:
                        stack.append(edge.out_node_id)
        return flipped

    # -- programs ------------------------------------------------------------

    def derivation_costs(self) -> tuple[dict, dict]:
        """Cheapest derivation of every grounded node, counted in operator applications.

        Ties go to the earliest-created edge.
        """
        cost = {}
        best: dict[int, OpEdge | None] = {}
        for n in self.nodes:
            if n.is_input:
                cost[n.id] = 0
                best[n.id] = None
        changed = True
        while changed:
            changed = False
            for e in self.edges:
                if not all(a in cost for a in e.arg_node_ids):
                    continue
                c = 1 + sum(cost[a] for a in e.arg_node_ids)
                if c < cost.get(e.out_node_id, float("inf")):
                    cost[e.out_node_id] = c
                    best[e.out_node_id] = e
                    changed = True
        return cost, best

    def program_for(self, node_id: int) -> Program:
        if not self.nodes[node_id].grounded:
            raise ValueError(f"node {node_id} is not grounded")
        _, best = self.derivation_costs()
        memo: dict[int, Program] = {}

        def build(nid):
            if nid in memo:
                return memo[nid]
            e = best[nid]
            if e is None:
                p = Input(self.nodes[nid].input_index)
            else:
                p = Call(e.function, tuple(build(a) for a in e.arg_node_ids))
            memo[nid] = p
            return p

        return build(node_id)

    def extract_program(self) -> Program:
        if not self.solved:
            raise ValueError("graph is not solved")
        return self.program_for(self.output_node_id)

    def check_invariants(self):
        """Assert deduplication and forward closure; used by tests and fuzzers."""
        seen = set()
        for n in self.nodes:
            assert n.value not in seen, f"duplicate node value at {n.id}"
            seen.add(n.value)
            assert self._index[n.value] == n.id
        for e in self.edges:
            if e.direction is Direction.FORWARD or e.satisfied:
                assert all(self.nodes[a].grounded for a in e.arg_node_ids)
                assert self.nodes[e.out_node_id].grounded
            else:
                assert not all(self.nodes[t].grounded for t in e.target_node_ids)


def init_graph(task: Task) -> SearchGraph:
    return SearchGraph(task)
