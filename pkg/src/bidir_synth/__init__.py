"""Bidirectional, execution-guided program synthesis.

A task is solved by growing a graph of example-tuple values forwards from the
inputs and backwards from the output (via inverse and conditional-inverse
semantics) until the two meet.  A policy chooses the operations; it can be
uniform-random, scripted, or a learned network trained with supervised
traces and REINFORCE.
"""
from .env import Action, EnvConfig, Observation, SynthEnv, valid_action_mask
from .graph import SearchGraph, init_graph
from .program import Call, Input, check_solution, evaluate, parse_sexpr, run
from .registry import Direction, FunctionDef, OperationVariant, Registry, enumerate_operations
from .values import DomainError, ExampleTuple, Grid, Task, hash_value, make_task, values_equal

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Call",
    "Direction",
    "DomainError",
    "EnvConfig",
    "ExampleTuple",
    "FunctionDef",
    "Grid",
    "Input",
    "Observation",
    "OperationVariant",
    "Registry",
    "SearchGraph",
    "SynthEnv",
    "Task",
    "check_solution",
    "enumerate_operations",
    "evaluate",
    "hash_value",
    "init_graph",
    "make_task",
    "parse_sexpr",
    "run",
    "valid_action_mask",
    "values_equal",
]
