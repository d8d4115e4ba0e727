"""
Which digit sets make 24?
=========================

Compare an exhaustive bidirectional search with a plain forward enumerator
over every multiset of four digits.
"""

# the search closure returns the cheapest program it finds, or None
from bidir_synth.closure import bidirectional_closure, brute_force_solvable, digit_multisets, game24_task
from bidir_synth.dsl import registry_for

arith = registry_for("arith24")
print(bidirectional_closure(game24_task((1, 2, 3, 8)), arith, max_cost=3))

# sweep all 495 digit multisets with both methods
by_search = {d for d in digit_multisets() if bidirectional_closure(game24_task(d), arith, max_cost=3)}
by_enumeration = {d for d in digit_multisets() if brute_force_solvable(d)}
print(len(by_search), "solvable; agreement:", by_search == by_enumeration)

# a few sets with no solution within three operations
print(sorted(set(digit_multisets()) - by_search)[:5])
