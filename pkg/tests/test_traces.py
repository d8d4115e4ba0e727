import numpy as np
import pytest

from bidir_synth.dsl import registry_for
from bidir_synth.env import EnvConfig, variant_keys
from bidir_synth.program import check_solution, evaluate, parse_sexpr, size
from bidir_synth.rng import stream
from bidir_synth.traces import (
    GenerationError,
    TraceGenConfig,
    backward_fraction,
    default_env_config,
    doubleadd_program,
    doubleadd_task,
    gen_dataset,
    gen_random_program,
    load_traces,
    program_to_bidir_trace,
    replay,
    save_traces,
)
from bidir_synth.values import ExampleTuple, make_task

ARITH = registry_for("arith24")


def keys(trace):
    variants = trace.observations[0].variants
    return [variants[a.variant_index].key for a in trace.actions]


def assert_replays(trace, env_config):
    _, rewards, env = replay(trace.task, trace.actions, env_config)
    assert env.solved and env.invalid_actions == 0
    assert rewards[-1] == env_config.R and all(r == 0 for r in rewards[:-1])


def test_random_program_depths_and_values():
    rng = np.random.default_rng(0)
    for depth in (1, 2, 3, 4):
        cfg = TraceGenConfig("arith24", min_depth=depth, max_depth=depth)
        for _ in range(50):
            prog, task = gen_random_program(cfg, rng)
            assert size(prog) == depth
            assert check_solution(prog, task)
            ex = task.train[0]
            assert all(1 <= d <= 9 for d in ex.inputs) and 0 <= ex.output <= 100
            assert ex.output not in ex.inputs


def test_random_grid_program():
    rng = np.random.default_rng(1)
    prog, task = gen_random_program(TraceGenConfig("grid", min_depth=3, max_depth=3), rng)
    assert size(prog) == 3 and len(task.train) == 3 and len(task.test) == 1
    assert check_solution(prog, task)


def test_generation_failure_is_reported():
    # with max_value 0 no depth-2 program can produce a fresh target
    cfg = TraceGenConfig("arith24", min_depth=2, max_depth=2, max_value=0, max_attempts=5)
    with pytest.raises(GenerationError):
        gen_random_program(cfg, np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValueError):
        TraceGenConfig(p_invert=1.5)
    with pytest.raises(ValueError):
        TraceGenConfig(min_depth=3, max_depth=2)


def test_forward_trace_is_bottom_up():
    prog = parse_sexpr("(mul (sub $0 $1) (mul $2 $3))", ARITH)
    task = make_task([((5, 3, 4, 3), 24)])
    t = program_to_bidir_trace(prog, task, 0.0, np.random.default_rng(0))
    assert keys(t) == ["sub", "mul", "mul"]
    assert_replays(t, default_env_config("arith24"))


def test_doubleadd_all_backward():
    task = doubleadd_task(7)
    prog = doubleadd_program(7, registry_for("doubleadd"))
    assert str(prog) == "(add_one (double (add_one $0)))"
    t = program_to_bidir_trace(prog, task, 1.0, np.random.default_rng(0))
    assert keys(t) == ["add_one^-1", "double^-1", "add_one^-1"]
    values = [n.value.entries[0] for n in t.observations[-1].nodes]
    assert values == [2, 7, 6, 3]
    assert_replays(t, default_env_config("doubleadd"))


def test_cond_inverse_needs_a_grounded_operand():
    # (1 + 5) * (2 + 2): the root is converted once its left operand is grounded,
    # then the right addition is deduced from the already-grounded input 2
    prog = parse_sexpr("(mul (add $0 $1) (add $2 $3))", ARITH)
    task = make_task([((1, 5, 2, 2), 24)])
    t = program_to_bidir_trace(prog, task, 1.0, np.random.default_rng(0))
    assert keys(t) == ["add", "mul^-1|0", "add^-1|0"]
    assert_replays(t, default_env_config("arith24"))


def test_operand_equal_to_an_input_needs_no_forward_step():
    # (2 - 1) * 3 * 8: the left operand evaluates to the input 3, so the root
    # cond-inverse deduces 8, which is already grounded
    prog = parse_sexpr("(mul (mul (sub $0 $1) $2) $3)", ARITH)
    task = make_task([((2, 1, 3, 8), 24)])
    t = program_to_bidir_trace(prog, task, 1.0, np.random.default_rng(0))
    assert keys(t) == ["mul^-1|0"]
    assert_replays(t, default_env_config("arith24"))


def test_mixed_probability_traces_replay():
    rng = np.random.default_rng(4)
    cfg = TraceGenConfig("arith24")
    for _ in range(300):
        prog, task = gen_random_program(cfg, rng)
        t = program_to_bidir_trace(prog, task, float(rng.random()), rng)
        assert_replays(t, default_env_config("arith24"))


def test_doubleadd_program_is_shortest():
    reg = registry_for("doubleadd")
    best = {2: 0}
    frontier = [2]
    while frontier:  # breadth-first search over +1 / x2
        nxt = []
        for v in frontier:
            for w in (v + 1, 2 * v):
                if w <= 300 and w not in best:
                    best[w] = best[v] + 1
                    nxt.append(w)
        frontier = nxt
    for target in range(3, 301):
        prog = doubleadd_program(target, reg)
        assert evaluate(prog, [ExampleTuple.of(2)]) == ExampleTuple.of(target)
        assert size(prog) == best[target]


@pytest.mark.parametrize("domain", ["arith24", "grid", "doubleadd"])
def test_dataset_replays_and_is_deterministic(domain):
    cfg = TraceGenConfig(domain)
    env = default_env_config(domain)
    a = gen_dataset(cfg, 60, seed=5, env_config=env)
    b = gen_dataset(cfg, 60, seed=5, env_config=env)
    assert [(t.task, t.actions) for t in a] == [(t.task, t.actions) for t in b]
    for t in a:
        assert_replays(t, env)
    c = gen_dataset(cfg, 60, seed=6, env_config=env)
    assert [t.actions for t in a] != [t.actions for t in c]


def test_backward_fraction_envelope():
    traces = gen_dataset(TraceGenConfig("arith24", p_invert=0.5), 10_000, seed=0)
    frac = backward_fraction(traces)
    assert 0.15 < frac < 0.6
    assert backward_fraction(gen_dataset(TraceGenConfig("arith24", p_invert=0.0), 200)) == 0.0


def test_forward_only_env_gets_forward_traces():
    env = default_env_config("grid", forward_only=True)
    traces = gen_dataset(TraceGenConfig("grid", p_invert=1.0), 30, env_config=env)
    assert backward_fraction(traces) == 0.0
    assert all(len(o.variants) == 6 for t in traces for o in t.observations)


def test_ndjson_round_trip(tmp_path):
    for domain in ("arith24", "grid", "doubleadd"):
        env = default_env_config(domain)
        traces = gen_dataset(TraceGenConfig(domain), 20, seed=3, env_config=env)
        path = tmp_path / f"{domain}.ndjson"
        save_traces(traces, path, domain)
        back = load_traces(path)
        assert len(back) == 20
        for t, u in zip(traces, back):
            assert t.task == u.task and t.actions == u.actions and t.seed == u.seed == 3
            assert str(t.program) == str(u.program)
            assert t.observations == u.observations
        # files are byte-stable
        again = tmp_path / "again.ndjson"
        save_traces(back, again, domain)
        assert again.read_bytes() == path.read_bytes()


def test_default_env_limits():
    assert default_env_config("doubleadd").max_steps == 64
    assert default_env_config("doubleadd", max_steps=20).max_steps == 20
    assert default_env_config("arith24") == EnvConfig("arith24")
