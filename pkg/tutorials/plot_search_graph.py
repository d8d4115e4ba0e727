"""
Solving a grid task by meeting in the middle
============================================

Build a search graph for a mirror-symmetry task and solve it with one
backward step: two forward steps build the left half of the output, and a
conditional inverse of ``hstack`` shows that the right half is the same grid.
"""

# a task: each output is the input beside its mirror image, twice over
from bidir_synth.dsl import registry_for
from bidir_synth.graph import SearchGraph
from bidir_synth.program import check_solution, parse_sexpr, run
from bidir_synth.registry import Direction, OperationVariant
from bidir_synth.values import Grid, make_task

grid = registry_for("grid")
target = parse_sexpr("(hstack (hstack (flip_h $0) $0) (hstack (flip_h $0) $0))", grid)
inputs = [Grid([[1, 2], [3, 0]]), Grid([[5, 5, 6]]), Grid([[7], [8], [9]])]
pairs = [(g, run(target, [g])) for g in inputs]
task = make_task(pairs[:2], pairs[2:], id="mirror")

# the graph starts with the grounded input and the ungrounded output
g = SearchGraph(task)
x, out = g.input_node_ids[0], g.output_node_id

# forward: flip the input, then put the flip beside the input
i1 = g.apply_action(OperationVariant(grid["flip_h"], Direction.FORWARD), (x,)).new_node_ids[0]
i2 = g.apply_action(OperationVariant(grid["hstack"], Direction.FORWARD), (i1, x)).new_node_ids[0]

# backward: the output is i2 beside something; deducing that something finds i2 itself
result = g.apply_action(OperationVariant(grid["hstack"], Direction.COND_INVERSE, (0,)), (out, i2))
print("solved:", result.solved)

# the program is read off the grounded derivations
program = g.extract_program()
print(program, check_solution(program, task))
