"""Policy interface and the two non-learned policies."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..env import Action, Observation, valid_action_mask


def _pick(rng: np.random.Generator, candidates: np.ndarray) -> int:
    idx = np.flatnonzero(candidates)
    return int(idx[int(rng.integers(len(idx)))])


class Policy:
    """Maps an observation to an action.  ``begin`` is called at episode reset."""

    def begin(self, task) -> None:
        pass

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        raise NotImplementedError

    def act_batch(self, observations: Sequence[Observation], rng: np.random.Generator,
                  tasks: Sequence | None = None, masks=None) -> list[Action]:
        return [self.act(o, rng) for o in observations]


class RandomPolicy(Policy):
    """Uniform over structurally valid variants, then uniform per argument slot."""

    def act(self, obs: Observation, rng: np.random.Generator, mask=None) -> Action:
        mask = mask if mask is not None else valid_action_mask(obs)
        if not mask.op.any():
            # nothing structurally valid: any action is penalised the same
            return Action(0, ())
        v = _pick(rng, mask.op)
        args = tuple(_pick(rng, mask.slots[v, j]) for j in range(mask.n_slots[v]))
        return Action(v, args)

    def act_batch(self, observations, rng, tasks=None, masks=None):
        masks = masks or [None] * len(observations)
        return [self.act(o, rng, m) for o, m in zip(observations, masks)]


class OraclePolicy(Policy):
    """Replays known action sequences, keyed by task id."""

    def __init__(self, traces):
        self.plans = {t.task.id: list(t.actions) for t in traces}
        self._plan: list[Action] = []

    def begin(self, task) -> None:
        self._plan = self.plans[task.id]

    def act(self, obs: Observation, rng=None) -> Action:
        return self._plan[obs.step]

    def act_batch(self, observations, rng, tasks=None, masks=None):
        return [self.plans[t.id][o.step] for o, t in zip(observations, tasks)]
