import numpy as np
import pytest

from bidir_synth.dsl import registry_for
from bidir_synth.registry import (
    Direction,
    FunctionDef,
    OperationVariant,
    Registry,
    apply_cond_inverse,
    apply_forward,
    apply_inverse,
    enumerate_operations,
)
from bidir_synth.values import INT, DomainError, ExampleTuple, Grid

from helpers import all_cond_cases, all_inverse_cases, check_cond_roundtrip, check_inverse_roundtrip

T = ExampleTuple.of


def test_apply_forward_examples():
    arith = registry_for("arith24")
    assert apply_forward(arith["add"], [T(1, 1), T(4, 2)]) == T(5, 3)
    assert apply_forward(arith["mul"], [T(2), T(3)]) == T(6)
    grid = registry_for("grid")
    a = T(Grid([[1]]), Grid([[1]]))
    b = T(Grid([[2]]), Grid([[2], [3]]))
    with pytest.raises(DomainError):
        apply_forward(grid["hstack"], [a, b])


def test_apply_forward_checks_arity_kind_and_length():
    arith = registry_for("arith24")
    with pytest.raises(DomainError):
        apply_forward(arith["add"], [T(1)])
    with pytest.raises(DomainError):
        apply_forward(arith["add"], [T(1), T(Grid([[1]]))])
    with pytest.raises(DomainError):
        apply_forward(arith["add"], [T(1), T(1, 2)])


def test_apply_inverse_examples():
    da = registry_for("doubleadd")
    assert apply_inverse(da["double"], T(6, 10)) == [T(3, 5)]
    with pytest.raises(DomainError):
        apply_inverse(da["double"], T(7))
    # one odd entry fails the whole tuple
    with pytest.raises(DomainError):
        apply_inverse(da["double"], T(6, 7))
    grid = registry_for("grid")
    g = Grid([[1, 2], [3, 4]])
    (pre,) = apply_inverse(grid["rotate_cw"], T(g))
    assert pre == T(grid["rotate_ccw"].forward(g))
    assert apply_forward(grid["rotate_cw"], [pre]) == T(g)
    with pytest.raises(DomainError):
        apply_inverse(grid["hstack"], T(g))


def test_apply_cond_inverse_examples():
    arith = registry_for("arith24")
    assert apply_cond_inverse(arith["add"], T(5), [(0, T(1))]) == [T(4)]
    with pytest.raises(DomainError):
        apply_cond_inverse(arith["mul"], T(7), [(0, T(2))])
    grid = registry_for("grid")
    out = T(Grid([[1, 3], [2, 4]]))
    left = T(Grid([[1], [2]]))
    assert apply_cond_inverse(grid["hstack"], out, [(0, left)]) == [T(Grid([[3], [4]]))]
    with pytest.raises(DomainError):
        apply_cond_inverse(grid["hstack"], out, [(0, T(Grid([[9], [2]])))])
    with pytest.raises(DomainError):
        apply_cond_inverse(grid["rotate_cw"], out, [(0, left)])


def test_division_by_known_zero_is_rejected():
    # 0 / x = 24 has no solution; a deduction of x = 0 would be unsound
    arith = registry_for("arith24")
    with pytest.raises(DomainError):
        apply_cond_inverse(arith["div"], T(24), [(0, T(0))])


def test_inconsistent_deduction_is_caught():
    # a deliberately wrong cond-inverse is rejected by forward confirmation
    bad = FunctionDef("add", (INT, INT), INT, lambda a, b: a + b, cond_inverses={(0,): lambda out, k: (out,)})
    with pytest.raises(DomainError):
        apply_cond_inverse(bad, T(5), [(0, T(1))])


def test_function_def_invariants():
    with pytest.raises(ValueError):
        FunctionDef("f", (INT,), INT, lambda a: a, cond_inverses={(1,): lambda o, k: ()})
    with pytest.raises(ValueError):
        FunctionDef("f", (INT, INT), INT, lambda a, b: a, cond_inverses={(0, 1): lambda o, k: ()})
    f = FunctionDef("f", (INT,), INT, lambda a: a)
    with pytest.raises(ValueError):
        OperationVariant(f, Direction.INVERSE)
    with pytest.raises(ValueError):
        Registry("dup", [f, f])


def test_enumerate_operations_counts_and_order():
    arith = registry_for("arith24")
    assert [v.key for v in enumerate_operations(arith, forward_only=True)] == ["add", "sub", "mul", "div"]
    full = enumerate_operations(arith)
    assert len(full) == 12
    assert sum(v.direction is Direction.COND_INVERSE for v in full) == 8
    grid = enumerate_operations(registry_for("grid"))
    kinds = [v.direction for v in grid]
    assert (kinds.count(Direction.FORWARD), kinds.count(Direction.INVERSE), kinds.count(Direction.COND_INVERSE)) == (6, 4, 4)
    assert all(v.direction is Direction.FORWARD for v in enumerate_operations(registry_for("grid"), True))
    # stable across calls
    assert [v.key for v in enumerate_operations(arith)] == [v.key for v in full]


def test_variant_slots():
    arith = registry_for("arith24")
    v = OperationVariant(arith["sub"], Direction.COND_INVERSE, (1,))
    assert v.key == "sub^-1|1"
    assert v.slots() == (("int", False), ("int", True))
    assert v.unknown_positions == (0,)
    assert OperationVariant(arith["sub"], Direction.FORWARD).slots() == (("int", True), ("int", True))


@pytest.mark.parametrize("domain,f", list(all_inverse_cases()), ids=lambda x: getattr(x, "name", x))
def test_inverse_roundtrip(domain, f):
    rng = np.random.default_rng(7)
    for i in range(200):
        check_inverse_roundtrip(f, domain, rng, k=1 + i % 3)


@pytest.mark.parametrize("domain,f,known", list(all_cond_cases()), ids=lambda x: getattr(x, "name", str(x)))
def test_cond_inverse_roundtrip(domain, f, known):
    rng = np.random.default_rng(11)
    checked = sum(check_cond_roundtrip(f, known, domain, rng, k=1 + i % 3) for i in range(200))
    assert checked >= 100


def test_failed_application_is_atomic():
    arith = registry_for("arith24")
    a, b = T(4, 5), T(2, 0)
    before = (a, b)
    with pytest.raises(DomainError):
        apply_forward(arith["div"], [a, b])
    assert (a, b) == before
