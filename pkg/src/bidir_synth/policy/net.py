"""Learned policy: node embedders, a DeepSet graph encoder, an operation head
and a pointer-style argument selector.

The graph embedding adds a projection of the output node's own embedding to
the pooled set summary, so both heads see the goal directly.

Observations are batched by padding node sets.  Grid example values are
one-hot encoded on a 30x30 canvas and embedded by a small convolutional
stack; integers use binary digits plus a one-hot of small values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..dsl import registry_for
from ..env import Action, ActionMask, Observation, valid_action_mask
from ..registry import enumerate_operations
from ..values import GRID, MAX_GRID_SIDE, NUM_COLORS
from .base import Policy

INT_BITS = 24
INT_ONEHOT = 102  # 0..100, then one bucket for everything larger
INT_FEATURES = INT_BITS + INT_ONEHOT + 1
N_FLAGS = 4


def int_features(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    m = len(values)
    bits = (values[:, None] >> np.arange(INT_BITS)) & 1
    onehot = np.zeros((m, INT_ONEHOT))
    onehot[np.arange(m), np.minimum(values, INT_ONEHOT - 1)] = 1.0
    scale = np.log1p(values)[:, None] / math.log1p(1e7)
    return np.concatenate([bits, onehot, scale], axis=1)


def grid_onehot(grids) -> np.ndarray:
    out = np.zeros((len(grids), NUM_COLORS, MAX_GRID_SIDE, MAX_GRID_SIDE), dtype=np.float32)
    for i, g in enumerate(grids):
        h, w = g.shape
        rows, cols = np.indices((h, w))
        out[i, g.cells.astype(np.int64), rows, cols] = 1.0
    return out


@dataclass
class NetConfig:
    domain: str
    width: int = 64
    conv_channels: tuple = (16, 32, 32)

    def to_dict(self) -> dict:
        return {"domain": self.domain, "width": self.width, "conv_channels": list(self.conv_channels)}

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(d["domain"], int(d["width"]), tuple(d["conv_channels"]))


def _mlp(sizes, act=nn.SiLU):
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(act())
    return nn.Sequential(*layers)


class GridEmbedder(nn.Module):
    def __init__(self, width: int, channels=(16, 32, 32)):
        super().__init__()
        layers, c_in = [], NUM_COLORS
        for i, c in enumerate(channels):
            layers += [nn.Conv2d(c_in, c, 3, stride=1 if i == 0 else 2, padding=1), nn.SiLU()]
            c_in = c
        self.conv = nn.Sequential(*layers)
        self.out = nn.Sequential(nn.Linear(c_in + 2, width), nn.SiLU())

    def forward(self, onehot: torch.Tensor, sizes: torch.Tensor) -> torch.Tensor:
        feats = self.conv(onehot).mean(dim=(2, 3))
        return self.out(torch.cat([feats, sizes], dim=1))


class IntEmbedder(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.net = nn.Sequential(_mlp([INT_FEATURES, width, width]), nn.SiLU())

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return self.net(feats)


@dataclass
class EncodedBatch:
    """Padded tensors for a batch of observations."""

    n_graphs: int
    n_max: int
    graph: torch.Tensor  # [M] graph index of each flat node
    pos: torch.Tensor  # [M] position within its graph
    flags: torch.Tensor  # [M, N_FLAGS]
    entry_mask: torch.Tensor  # [M, K]
    entry_feats: torch.Tensor | None  # ints: [M, K, F]
    entry_grid: torch.Tensor | None  # grids: [M, K] index into unique grids (0 when padded)
    grids: list | None
    node_mask: torch.Tensor  # [B, N]


class PolicyNet(nn.Module):
    def __init__(self, config: NetConfig, dtype=torch.float32):
        super().__init__()
        self.config = config
        d = config.width
        variants = enumerate_operations(registry_for(config.domain), forward_only=False)
        self.variant_keys = [v.key for v in variants]
        self.n_slots = [len(v.slots()) for v in variants]
        self.max_slots = max(self.n_slots)
        self._key_index = {k: i for i, k in enumerate(self.variant_keys)}
        if config.domain == GRID:
            self.value_embed = GridEmbedder(d, config.conv_channels)
        else:
            self.value_embed = IntEmbedder(d)
        self.node_mlp = nn.Sequential(_mlp([d + N_FLAGS, d, d]), nn.SiLU())
        self.set_phi = nn.Sequential(_mlp([d, d, d]), nn.SiLU())
        self.set_rho = nn.Sequential(_mlp([d, d, d]), nn.SiLU())
        # the output (goal) node's embedding is added to the pooled set summary
        self.goal_proj = nn.Linear(d, d)
        self.op_head = nn.Linear(d, len(variants))
        self.variant_emb = nn.Embedding(len(variants), d)
        self.slot_emb = nn.Embedding(self.max_slots, d)
        self.ptr_query = _mlp([4 * d, d, d])
        self.ptr_key = nn.Linear(d, d)
        self.to(dtype)
        self.dtype = dtype
        self._grid_cache: dict = {}
        self._maps: dict = {}

    # -- bookkeeping -------------------------------------------------------

    def invalidate(self):
        """Drop cached embeddings; call after every parameter update."""
        self._grid_cache.clear()

    def variant_map(self, variants) -> np.ndarray:
        """Indices of an environment's variant table within this net's head."""
        hit = self._maps.get(id(variants))
        if hit is not None and hit[0] is variants:
            return hit[1]
        m = np.array([self._key_index[v.key] for v in variants], dtype=np.int64)
        self._maps[id(variants)] = (variants, m)
        return m

    # -- encoding ----------------------------------------------------------

    def encode_batch(self, observations: Sequence[Observation]) -> EncodedBatch:
        graph, pos, flags, values = [], [], [], []
        for b, obs in enumerate(observations):
            for i, r in enumerate(obs.nodes):
                graph.append(b)
                pos.append(i)
                flags.append((r.grounded, r.is_input, r.is_output, r.used))
                values.append(r.value.entries)
        m = len(values)
        k = max(len(v) for v in values)
        entry_mask = np.zeros((m, k), dtype=bool)
        for i, v in enumerate(values):
            entry_mask[i, : len(v)] = True
        n_max = max(o.n_nodes for o in observations)
        node_mask = np.zeros((len(observations), n_max), dtype=bool)
        node_mask[graph, pos] = True
        feats = grid_idx = grids = None
        if self.config.domain == GRID:
            uniq: dict = {}
            grid_idx = np.zeros((m, k), dtype=np.int64)
            for i, v in enumerate(values):
                for j, g in enumerate(v):
                    grid_idx[i, j] = uniq.setdefault(g, len(uniq))
            grids = list(uniq)
            grid_idx = torch.from_numpy(grid_idx)
        else:
            flat = np.zeros((m, k), dtype=np.int64)
            for i, v in enumerate(values):
                flat[i, : len(v)] = v
            feats = torch.from_numpy(int_features(flat.reshape(-1)).reshape(m, k, INT_FEATURES)).to(self.dtype)
        return EncodedBatch(
            len(observations),
            n_max,
            torch.tensor(graph, dtype=torch.long),
            torch.tensor(pos, dtype=torch.long),
            torch.tensor(flags, dtype=self.dtype),
            torch.from_numpy(entry_mask),
            feats,
            grid_idx,
            grids,
            torch.from_numpy(node_mask),
        )

    def _grid_vectors(self, grids) -> torch.Tensor:
        use_cache = not torch.is_grad_enabled()
        if use_cache:
            missing = [g for g in grids if g not in self._grid_cache]
        else:
            missing = list(grids)
        if missing:
            onehot = torch.from_numpy(grid_onehot(missing)).to(self.dtype)
            sizes = torch.tensor([g.shape for g in missing], dtype=self.dtype) / MAX_GRID_SIDE
            emb = self.value_embed(onehot, sizes)
            if not use_cache:
                return emb
            for g, e in zip(missing, emb):
                self._grid_cache[g] = e
        return torch.stack([self._grid_cache[g] for g in grids])

    def encode(self, enc: EncodedBatch):
        """Node embeddings ``[B, N, d]`` and graph embeddings ``[B, d]``."""
        if enc.grids is not None:
            per_entry = self._grid_vectors(enc.grids)[enc.entry_grid]
        else:
            per_entry = self.value_embed(enc.entry_feats)
        w = enc.entry_mask.to(self.dtype).unsqueeze(-1)
        value = (per_entry * w).sum(1) / w.sum(1)
        h = self.node_mlp(torch.cat([value, enc.flags], dim=1))
        d = h.shape[1]
        H = torch.zeros(enc.n_graphs, enc.n_max, d, dtype=self.dtype)
        H = H.index_put((enc.graph, enc.pos), h)
        phi = self.set_phi(h)
        pooled = torch.zeros(enc.n_graphs, d, dtype=self.dtype).index_add(0, enc.graph, phi)
        counts = torch.bincount(enc.graph, minlength=enc.n_graphs).to(self.dtype).unsqueeze(1)
        G = self.set_rho(pooled / counts)
        is_out = enc.flags[:, 2] > 0.5
        goal = torch.zeros(enc.n_graphs, d, dtype=self.dtype).index_add(0, enc.graph[is_out], h[is_out])
        G = G + self.goal_proj(goal)
        return H, G

    def op_logits(self, G):
        return self.op_head(G)

    def arg_logits(self, keys, G, variant, slot, prev_ctx):
        """Pointer scores over nodes for one argument slot per row."""
        q = self.ptr_query(
            torch.cat([G, self.variant_emb(variant), self.slot_emb(slot), prev_ctx], dim=1)
        )
        return torch.einsum("bnd,bd->bn", keys, q) / math.sqrt(q.shape[1])

    # -- batched log-probabilities -------------------------------------------

    def masks_for(self, observations, masks=None):
        """Operation mask in net coordinates and per-slot node masks."""
        if masks is None:
            masks = [valid_action_mask(o) for o in observations]
        B = len(observations)
        n_max = max(o.n_nodes for o in observations)
        op_mask = np.zeros((B, len(self.variant_keys)), dtype=bool)
        slot_mask = np.zeros((B, len(self.variant_keys), self.max_slots, n_max), dtype=bool)
        for b, (o, mk) in enumerate(zip(observations, masks)):
            vm = self.variant_map(o.variants)
            op_mask[b, vm] = mk.op
            s = mk.slots.shape[1]
            slot_mask[b, vm, :s, : o.n_nodes] = mk.slots
        dead = ~op_mask.any(axis=1)
        if dead.any():
            # no structurally valid action: fall back to uniform over the env's variants
            for b in np.flatnonzero(dead):
                vm = self.variant_map(observations[b].variants)
                op_mask[b, vm] = True
                slot_mask[b, vm, :, : observations[b].n_nodes] = True
        return op_mask, slot_mask

    def log_prob_batch(self, observations, actions, masks=None):
        """Log-probabilities ``[B]`` and entropies ``[B]`` of the given actions."""
        enc = self.encode_batch(observations)
        H, G = self.encode(enc)
        op_mask, slot_mask = self.masks_for(observations, masks)
        B = len(observations)
        net_v = np.array(
            [self.variant_map(o.variants)[a.variant_index] for o, a in zip(observations, actions)]
        )
        op_lp = masked_log_softmax(self.op_logits(G), torch.from_numpy(op_mask))
        rows = torch.arange(B)
        logp = op_lp[rows, torch.from_numpy(net_v)]
        ent = entropy(op_lp)
        keys = self.ptr_key(H)
        prev = torch.zeros_like(G)
        n_prev = torch.zeros(B, 1, dtype=self.dtype)
        n_slots = np.array([self.n_slots[v] for v in net_v])
        for j in range(self.max_slots):
            active = np.flatnonzero(n_slots > j)
            if len(active) == 0:
                break
            act = torch.from_numpy(active)
            args = torch.tensor([actions[b].args[j] for b in active], dtype=torch.long)
            ctx = prev[act] / n_prev[act].clamp(min=1)
            lg = self.arg_logits(
                keys[act], G[act], torch.from_numpy(net_v[active]), torch.full((len(active),), j), ctx
            )
            m = torch.from_numpy(slot_mask[active, net_v[active], j])
            lp = masked_log_softmax(lg, m)
            sel = lp[torch.arange(len(active)), args]
            logp = logp.index_add(0, act, sel)
            ent = ent.index_add(0, act, entropy(lp))
            prev = prev.index_add(0, act, H[act, args])
            n_prev = n_prev.index_add(0, act, torch.ones(len(active), 1, dtype=self.dtype))
        return logp, ent

    # -- sampling ----------------------------------------------------------

    @torch.no_grad()
    def sample_batch(self, observations, rng: np.random.Generator, greedy: bool = False, masks=None):
        enc = self.encode_batch(observations)
        H, G = self.encode(enc)
        op_mask, slot_mask = self.masks_for(observations, masks)
        op_lp = masked_log_softmax(self.op_logits(G), torch.from_numpy(op_mask)).double().numpy()
        net_v = _choose(op_lp, rng, greedy)
        B = len(observations)
        args = [[] for _ in range(B)]
        keys = self.ptr_key(H)
        prev = torch.zeros_like(G)
        n_prev = torch.zeros(B, 1, dtype=self.dtype)
        n_slots = np.array([self.n_slots[v] for v in net_v])
        for j in range(self.max_slots):
            active = np.flatnonzero(n_slots > j)
            if len(active) == 0:
                break
            act = torch.from_numpy(active)
            ctx = prev[act] / n_prev[act].clamp(min=1)
            lg = self.arg_logits(
                keys[act], G[act], torch.from_numpy(net_v[active]), torch.full((len(active),), j), ctx
            )
            m = torch.from_numpy(slot_mask[active, net_v[active], j])
            lp = masked_log_softmax(lg, m).double().numpy()
            picks = _choose(lp, rng, greedy)
            for b, p in zip(active, picks):
                args[b].append(int(p))
            sel = torch.from_numpy(picks)
            prev = prev.index_add(0, act, H[act, sel])
            n_prev = n_prev.index_add(0, act, torch.ones(len(active), 1, dtype=self.dtype))
        out = []
        for b, o in enumerate(observations):
            inv = {int(n): i for i, n in enumerate(self.variant_map(o.variants))}
            out.append(Action(inv[int(net_v[b])], tuple(args[b])))
        return out


def masked_log_softmax(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Log-softmax with masked entries at exactly ``-inf`` (probability 0)."""
    neg = torch.tensor(float("-inf"), dtype=logits.dtype)
    return torch.log_softmax(torch.where(mask, logits, neg), dim=-1)


def entropy(logp: torch.Tensor) -> torch.Tensor:
    safe = torch.where(torch.isfinite(logp), logp, torch.zeros_like(logp))
    return -(logp.exp() * safe).sum(-1)


def _choose(logp: np.ndarray, rng: np.random.Generator, greedy: bool) -> np.ndarray:
    if greedy:
        return np.argmax(logp, axis=1)
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    c = np.cumsum(p, axis=1)
    u = rng.random(len(p)) * c[:, -1]
    idx = (c < u[:, None]).sum(axis=1)
    # guard against landing on a zero-probability tail through rounding
    idx = np.minimum(idx, p.shape[1] - 1)
    bad = p[np.arange(len(p)), idx] == 0
    if bad.any():
        idx[bad] = np.argmax(p[bad], axis=1)
    return idx


# -- single-observation API ----------------------------------------------------


class ActionDistribution:
    """Factorised distribution: operation, then each argument slot left to right."""

    def __init__(self, net: PolicyNet, obs: Observation, mask: ActionMask | None = None):
        self.net = net
        self.obs = obs
        self.mask = mask if mask is not None else valid_action_mask(obs)
        self._vm = net.variant_map(obs.variants)
        with torch.no_grad():
            enc = net.encode_batch([obs])
            self._H, self._G = net.encode(enc)
            self._keys = net.ptr_key(self._H)
            op_mask, self._slot_mask = net.masks_for([obs], [self.mask])
            lp = masked_log_softmax(net.op_logits(self._G), torch.from_numpy(op_mask))
        self.op_log_probs = lp[0, torch.from_numpy(self._vm)].double().numpy()

    def n_slots(self, variant_index: int) -> int:
        return self.net.n_slots[int(self._vm[variant_index])]

    def arg_log_probs(self, variant_index: int, prev_args: Sequence[int]) -> np.ndarray:
        net_v = int(self._vm[variant_index])
        j = len(prev_args)
        with torch.no_grad():
            if prev_args:
                ctx = self._H[0, list(prev_args)].mean(0, keepdim=True)
            else:
                ctx = torch.zeros_like(self._G)
            lg = self.net.arg_logits(
                self._keys, self._G, torch.tensor([net_v]), torch.tensor([j]), ctx
            )
            m = torch.from_numpy(self._slot_mask[0:1, net_v, j])
            return masked_log_softmax(lg, m)[0].double().numpy()


def action_distribution(observation: Observation, params: PolicyNet, mask: ActionMask | None = None) -> ActionDistribution:
    return ActionDistribution(params, observation, mask)


def sample_action(dist: ActionDistribution, rng: np.random.Generator, greedy: bool = False) -> Action:
    v = int(_choose(dist.op_log_probs[None], rng, greedy)[0])
    args: list[int] = []
    for _ in range(dist.n_slots(v)):
        lp = dist.arg_log_probs(v, args)
        args.append(int(_choose(lp[None], rng, greedy)[0]))
    return Action(v, tuple(args))


def log_prob(dist: ActionDistribution, action: Action) -> float:
    v = action.variant_index
    if not 0 <= v < len(dist.op_log_probs) or not np.isfinite(dist.op_log_probs[v]):
        raise ValueError(f"action {action} lies outside the mask")
    if len(action.args) != dist.n_slots(v):
        raise ValueError(f"action {action} has the wrong number of arguments")
    total = dist.op_log_probs[v]
    for j, a in enumerate(action.args):
        lp = dist.arg_log_probs(v, action.args[:j])
        if not 0 <= a < len(lp) or not np.isfinite(lp[a]):
            raise ValueError(f"action {action} lies outside the mask")
        total += lp[a]
    return float(total)


class NeuralPolicy(Policy):
    def __init__(self, net: PolicyNet, greedy: bool = False):
        self.net = net
        self.greedy = greedy

    def act(self, obs, rng):
        return self.net.sample_batch([obs], rng, self.greedy)[0]

    def act_batch(self, observations, rng, tasks=None, masks=None):
        return self.net.sample_batch(observations, rng, self.greedy, masks)
