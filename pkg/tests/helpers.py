"""Random valid arguments for every DSL function, and the round-trip laws."""
import numpy as np

from bidir_synth.dsl import registry_for
from bidir_synth.registry import apply_cond_inverse, apply_forward, apply_inverse
from bidir_synth.values import DomainError, ExampleTuple, Grid

DOMAINS = ("grid", "arith24", "doubleadd")


def random_cells(rng, h, w):
    return Grid(rng.integers(0, 10, size=(h, w)))


def _sample_one(f, domain, rng):
    """One example's arguments on which ``f`` is defined (rejection-sampled)."""
    while True:
        if domain == "grid":
            h, w = (int(x) for x in rng.integers(1, 8, size=2))
            if f.name == "hstack":
                vals = [random_cells(rng, h, int(rng.integers(1, 8))) for _ in range(2)]
            elif f.name == "vstack":
                vals = [random_cells(rng, int(rng.integers(1, 8)), w) for _ in range(2)]
            else:
                vals = [random_cells(rng, h, w)]
        elif domain == "arith24":
            vals = [int(x) for x in rng.integers(0, 101, size=2)]
        else:
            vals = [int(rng.integers(0, 10**6))]
        try:
            f.forward(*vals)
        except DomainError:
            continue
        return vals


def sample_args(f, domain, rng, k):
    """``k`` examples of arguments on which ``f`` is defined, and the forward output."""
    per_example = [_sample_one(f, domain, rng) for _ in range(k)]
    args = [ExampleTuple(tuple(ex[j] for ex in per_example)) for j in range(f.arity)]
    return args, apply_forward(f, args)


def check_inverse_roundtrip(f, domain, rng, k):
    args, out = sample_args(f, domain, rng, k)
    deduced = apply_inverse(f, out)
    assert apply_forward(f, deduced) == out
    # rotations, flips, add_one and double are injective: the preimage is the argument
    assert deduced == args


def _other_preimage_exists(f, args, pos, out):
    """True when some value other than args[pos] also reproduces ``out`` (integers only)."""
    for i, o in enumerate(out.entries):
        hidden = args[pos].entries[i]
        for v in range(0, 101):
            if v == hidden:
                continue
            trial = [a.entries[i] for a in args]
            trial[pos] = v
            try:
                if f.forward(*trial) == o:
                    return True
            except DomainError:
                pass
    return False


def check_cond_roundtrip(f, known_positions, domain, rng, k):
    """Deduce the hidden arguments; return False if the instance was skipped as non-unique."""
    args, out = sample_args(f, domain, rng, k)
    known = [(p, args[p]) for p in known_positions]
    hidden = [p for p in range(f.arity) if p not in known_positions]
    try:
        deduced = apply_cond_inverse(f, out, known)
    except DomainError:
        assert domain == "arith24" and _other_preimage_exists(f, args, hidden[0], out), (
            f"{f.name} with known {known_positions} failed on a uniquely solvable instance"
        )
        return False
    assert deduced == [args[p] for p in hidden]
    full = list(args)
    for p, d in zip(hidden, deduced):
        full[p] = d
    assert apply_forward(f, full) == out
    return True


def all_inverse_cases():
    for domain in DOMAINS:
        for f in registry_for(domain):
            if f.inverse is not None:
                yield domain, f


def all_cond_cases():
    for domain in DOMAINS:
        for f in registry_for(domain):
            for known in sorted(f.cond_inverses):
                yield domain, f, known


def run_roundtrip_suite(n=1000, seed=0):
    """Sweep every inverse variant; returns {(function, variant): checked count}."""
    rng = np.random.default_rng(seed)
    counts = {}
    for domain, f in all_inverse_cases():
        for i in range(n):
            check_inverse_roundtrip(f, domain, rng, k=1 + i % 3)
        counts[(f.name, "inverse")] = n
    for domain, f, known in all_cond_cases():
        checked = 0
        for i in range(n):
            checked += check_cond_roundtrip(f, known, domain, rng, k=1 + i % 3)
        counts[(f.name, f"cond{known}")] = checked
    return counts


# -- enumerable toy MDP -----------------------------------------------------------

import torch  # noqa: E402

from bidir_synth.env import Action, EnvConfig, SynthEnv, valid_action_mask  # noqa: E402
from bidir_synth.values import make_task  # noqa: E402

TOY_TASK = make_task([((2, 3), 10)], id="toy")
TOY_ENV = EnvConfig("arith24", max_steps=2)


def _legal(obs):
    mask = valid_action_mask(obs)
    out = []
    for v in np.flatnonzero(mask.op):
        combos = [()]
        for j in range(mask.n_slots[v]):
            combos = [c + (int(n),) for c in combos for n in np.flatnonzero(mask.slots[v, j])]
        out += [Action(int(v), c) for c in combos]
    return out


def toy_trajectories(task=TOY_TASK, env_config=TOY_ENV):
    """Every trajectory with non-zero probability: (observations, actions, return)."""
    out = []

    def go(prefix):
        env = SynthEnv(env_config)
        obs = env.reset(task)
        ret = 0.0
        seen = []
        for a in prefix:
            seen.append(obs)
            obs, r, _, _ = env.step(a)
            ret += r
        if env.done:
            out.append((seen, list(prefix), ret))
            return
        for a in _legal(obs):
            go(prefix + [a])

    go([])
    return out


def exact_gradient(net, trajectories):
    """Gradient of the exact expected return, flattened."""
    obs = [o for t in trajectories for o in t[0]]
    acts = [a for t in trajectories for a in t[1]]
    owner = torch.tensor([k for k, t in enumerate(trajectories) for _ in t[1]])
    logp, _ = net.log_prob_batch(obs, acts)
    per_traj = torch.zeros(len(trajectories), dtype=logp.dtype).index_add(0, owner, logp)
    returns = torch.tensor([t[2] for t in trajectories], dtype=logp.dtype)
    prob = per_traj.exp()
    net.zero_grad()
    (prob * returns).sum().backward()
    grad = torch.cat([p.grad.reshape(-1) for p in net.parameters()]).detach().clone()
    prob = prob.detach()
    return grad, float(prob.sum()), float((prob * returns).sum())


def sampled_gradient_projections(net, directions, n_episodes, batch, baseline, seed=0):
    """Per-batch REINFORCE estimates (trainer surrogate) projected onto ``directions``."""
    from bidir_synth.policy import NeuralPolicy
    from bidir_synth.trainer import episode_return, reinforce_loss, rollout_batch

    rng = np.random.default_rng(seed)
    policy = NeuralPolicy(net)
    rows = []
    for _ in range(n_episodes // batch):
        eps = rollout_batch([TOY_TASK] * batch, policy, TOY_ENV, rng)
        returns = [episode_return(e.rewards) for e in eps]
        loss = reinforce_loss(net, eps, returns, baseline, 0.0)
        net.zero_grad()
        loss.backward()
        g = -torch.cat([p.grad.reshape(-1) for p in net.parameters()]).detach()
        rows.append((directions @ g).numpy())
    return np.array(rows)


def toy_unbiasedness(net, n_episodes, batch=1000, baseline=0.0, n_directions=4, seed=0):
    """Max |z| between sampled and exact projected gradients, plus diagnostics."""
    traj = toy_trajectories()
    exact, total_p, value = exact_gradient(net, traj)
    rng = np.random.default_rng(seed + 1)
    directions = torch.from_numpy(rng.standard_normal((n_directions, exact.numel()))).to(exact.dtype)
    directions /= directions.norm(dim=1, keepdim=True)
    target = (directions @ exact).numpy()
    samples = sampled_gradient_projections(net, directions, n_episodes, batch, baseline, seed)
    mean = samples.mean(0)
    se = samples.std(0, ddof=1) / np.sqrt(len(samples))
    z = (mean - target) / se
    return {"z": z, "total_prob": total_p, "expected_return": value, "n_traj": len(traj),
            "exact": target, "mean": mean, "se": se}


def exact_reinforce_update(net, trajectories, shift=0.0, baseline=0.0):
    """Exact expectation of the REINFORCE update with returns shifted by ``shift``."""
    obs = [o for t in trajectories for o in t[0]]
    acts = [a for t in trajectories for a in t[1]]
    owner = torch.tensor([k for k, t in enumerate(trajectories) for _ in t[1]])
    logp, _ = net.log_prob_batch(obs, acts)
    per_traj = torch.zeros(len(trajectories), dtype=logp.dtype).index_add(0, owner, logp)
    adv = torch.tensor([t[2] + shift - baseline for t in trajectories], dtype=logp.dtype)
    net.zero_grad()
    (per_traj.exp().detach() * adv * per_traj).sum().backward()
    return torch.cat([p.grad.reshape(-1) for p in net.parameters()]).detach().clone()


# -- finite differences -------------------------------------------------------------


def grad_errors(net, obs, act, rng, directions, eps=1e-6):
    params = [p for p in net.parameters()]
    net.zero_grad()
    lp, _ = net.log_prob_batch([obs], [act])
    lp.sum().backward()
    grads = [p.grad.detach().clone() for p in params]
    errs = []
    for _ in range(directions):
        d = [torch.from_numpy(rng.standard_normal(p.shape)) for p in params]
        analytic = sum(float((g * di).sum()) for g, di in zip(grads, d))
        with torch.no_grad():
            for p, di in zip(params, d):
                p += eps * di
            net.invalidate()  # in-place edits bypass the grid embedding cache
            up = float(net.log_prob_batch([obs], [act])[0].sum())
            for p, di in zip(params, d):
                p -= 2 * eps * di
            net.invalidate()
            down = float(net.log_prob_batch([obs], [act])[0].sum())
            for p, di in zip(params, d):
                p += eps * di
            net.invalidate()
        numeric = (up - down) / (2 * eps)
        errs.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return errs
