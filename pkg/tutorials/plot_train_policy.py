"""
Training a policy on double-and-add
===================================

Generate backward traces, fit the policy for one epoch, and solve held-out
targets greedily.
"""

# traces: every step of a shortest chain, taken backwards from the target
import numpy as np
import torch

from bidir_synth.dsl import registry_for
from bidir_synth.policy import NetConfig, NeuralPolicy, PolicyNet
from bidir_synth.traces import default_env_config, doubleadd_program, doubleadd_task, program_to_bidir_trace
from bidir_synth.trainer import TrainConfig, evaluate_solve_rate, supervised_train

reg = registry_for("doubleadd")
env = default_env_config("doubleadd")
rng = np.random.default_rng(0)
targets = [int(t) for t in rng.integers(3, 1000, size=1500)]
traces = [program_to_bidir_trace(doubleadd_program(t, reg), doubleadd_task(t), 1.0, rng, env) for t in targets]

# one supervised epoch with small batches
torch.manual_seed(0)
net = PolicyNet(NetConfig("doubleadd", width=64))
net, report = supervised_train(traces, net, TrainConfig(epochs=1, batch_size=2, lr=1e-3, domain="doubleadd"))
print("loss", report.losses)

# greedy rollouts on targets outside the training set
held = [doubleadd_task(t) for t in range(1000, 1020)]
rate, _ = evaluate_solve_rate(held, NeuralPolicy(net, greedy=True), 1, env, seed=0)
print("held-out solve rate", rate)
