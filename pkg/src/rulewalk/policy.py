"""Walk policy: entity/relation embeddings, stacked LSTM history encoder and action scoring.

All math is plain numpy in float64. The forward pass is batched over rollouts;
gradients come from a hand-written backward pass through the unrolled T steps.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyActionSet,
    InvalidDimension,
    InvalidPath,
    StaleTrajectory,
    VocabularyMismatch,
)
from .graph import Action, KnowledgeGraph

CHECKPOINT_MAGIC = b"RWPOLICY"
CHECKPOINT_VERSION = 1


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class PolicyConfig:
    embedding_dim: int = 64
    hidden_size: int = 128
    mlp_size: int = 128
    num_layers: int = 2

    def __post_init__(self):
        for name in ("embedding_dim", "hidden_size", "mlp_size", "num_layers"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise InvalidDimension(f"{name} must be a positive integer, got {v!r}")


def param_shapes(c: PolicyConfig, num_entities: int, num_relations: int) -> dict[str, tuple[int, ...]]:
    d, H = c.embedding_dim, c.hidden_size
    shapes = {"entity_emb": (num_entities, d), "relation_emb": (num_relations, d)}
    for l in range(c.num_layers):
        shapes[f"lstm{l}.W"] = (4 * H, 3 * d if l == 0 else H)
        shapes[f"lstm{l}.U"] = (4 * H, H)
        shapes[f"lstm{l}.b"] = (4 * H,)
    shapes["W1"] = (c.mlp_size, H)
    shapes["W2"] = (2 * d, c.mlp_size)
    return shapes


class PolicyNetwork:
    """Parameter container. ``params`` maps tensor names to float64 arrays.

    Relation table has one extra row at index ``num_relations - 1`` for STAY.
    ``version`` is bumped on every parameter update so stale rollouts can be rejected.
    """

    def __init__(self, config: PolicyConfig, num_entities: int, num_relations: int, params: dict, vocab_hash: str = ""):
        self.config = config
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.params = params
        self.vocab_hash = vocab_hash
        self.version = 0
        self._check_shapes()

    @property
    def d(self) -> int:
        return self.config.embedding_dim

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return param_shapes(self.config, self.num_entities, self.num_relations)

    def _check_shapes(self):
        expected = self.param_shapes()
        if set(expected) != set(self.params):
            raise DimensionMismatch(f"parameter names {sorted(self.params)} != {sorted(expected)}")
        for k, shape in expected.items():
            if self.params[k].shape != shape:
                raise DimensionMismatch(f"{k}: shape {self.params[k].shape} != {shape}")

    def copy(self) -> "PolicyNetwork":
        net = PolicyNetwork(self.config, self.num_entities, self.num_relations,
                            {k: v.copy() for k, v in self.params.items()}, self.vocab_hash)
        net.version = self.version
        return net

    def check_graph(self, kg: KnowledgeGraph) -> None:
        if kg.num_entities != self.num_entities or kg.num_relations + 1 != self.num_relations:
            raise VocabularyMismatch("policy vocabulary sizes do not match the graph")
        if self.vocab_hash and self.vocab_hash != kg.vocab_hash():
            raise VocabularyMismatch("policy vocabulary hash does not match the graph")


def init_policy(
    kg: KnowledgeGraph,
    embedding_dim: int = 64,
    hidden_size: int = 128,
    mlp_size: int = 128,
    num_layers: int = 2,
    seed=None,
) -> PolicyNetwork:
    """Fan-in scaled uniform init; LSTM forget-gate biases start at 1, other biases at 0."""
    config = PolicyConfig(embedding_dim, hidden_size, mlp_size, num_layers)
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config, kg.num_entities, kg.num_relations + 1).items():
        if name.endswith(".b"):
            b = np.zeros(shape)
            b[hidden_size : 2 * hidden_size] = 1.0
            params[name] = b
        else:
            bound = 1.0 / np.sqrt(shape[-1])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return PolicyNetwork(config, kg.num_entities, kg.num_relations + 1, params, kg.vocab_hash())


# ---------------------------------------------------------------------------
# forward primitives
# ---------------------------------------------------------------------------

def lstm_forward(params: dict, num_layers: int, x, hs, cs):
    """One time step through all layers. Returns new (hs, cs) lists and a cache for backprop."""
    new_h, new_c, cache = [], [], []
    inp = x
    for l in range(num_layers):
        W, U, b = params[f"lstm{l}.W"], params[f"lstm{l}.U"], params[f"lstm{l}.b"]
        if inp.shape[-1] != W.shape[1]:
            raise DimensionMismatch(f"layer {l} expects input width {W.shape[1]}, got {inp.shape[-1]}")
        H = U.shape[1]
        z = inp @ W.T + hs[l] @ U.T + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = sigmoid(z[:, 3 * H :])
        c = f * cs[l] + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.append((inp, hs[l], cs[l], i, f, g, o, tc))
        new_h.append(h)
        new_c.append(c)
        inp = h
    return new_h, new_c, cache


def encoder_input(params: dict, d: int, prev_rel, cur, src, first: bool):
    """Rows of [a_{t-1}; e_c] with a_{t-1} = [r_{t-1}; e_t], or zeros at the first step."""
    E, R = params["entity_emb"], params["relation_emb"]
    n = len(src)
    if first:
        prev = np.zeros((n, 2 * d))
    else:
        prev = np.concatenate([R[prev_rel], E[cur]], axis=1)
    return np.concatenate([prev, E[src]], axis=1)


def policy_head(params: dict, h_top):
    y = h_top @ params["W1"].T
    u = np.maximum(y, 0.0)
    return u @ params["W2"].T, (y, u)


def action_logits(params: dict, d: int, z, rel, ent):
    """logits[n, k] = [r_k; e_k] . z_n, computed without materialising the action matrix."""
    rs = z[:, :d] @ params["relation_emb"].T
    es = z[:, d:] @ params["entity_emb"].T
    return np.take_along_axis(rs, rel, 1) + np.take_along_axis(es, ent, 1)


def masked_log_softmax(logits, valid):
    x = np.where(valid, logits, -np.inf)
    m = x.max(axis=1, keepdims=True)
    ex = np.exp(x - m)
    s = ex.sum(axis=1, keepdims=True)
    logp = np.where(valid, x - m - np.log(s), -np.inf)
    return logp, ex / s


def sample_rows(p, rng) -> np.ndarray:
    """One categorical draw per row; zero-probability columns can never be returned."""
    cum = np.cumsum(p, axis=1)
    v = rng.random(len(p)) * cum[:, -1]
    col = (cum <= v[:, None]).sum(axis=1)
    last = p.shape[1] - 1 - np.argmax(p[:, ::-1] > 0, axis=1)
    return np.minimum(col, last)


def zero_state(net: PolicyNetwork, n: int):
    H = net.config.hidden_size
    L = net.config.num_layers
    return [np.zeros((n, H)) for _ in range(L)], [np.zeros((n, H)) for _ in range(L)]


# ---------------------------------------------------------------------------
# single-agent API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentState:
    """Observed state (e_t, e_c) plus encoder memory; the query target is deliberately absent."""

    entity: int
    source: int
    hidden: tuple = ()
    cells: tuple = ()
    step: int = 0

    @property
    def output(self) -> np.ndarray:
        return self.hidden[-1]


def initial_state(net: PolicyNetwork, source: int) -> AgentState:
    hs, cs = zero_state(net, 1)
    return AgentState(int(source), int(source), tuple(h[0] for h in hs), tuple(c[0] for c in cs), 0)


def encode_history(net: PolicyNetwork, state: AgentState, prev_action: tuple[int, int] | None) -> AgentState:
    """Feed [a_{t-1}; e_c] through the encoder and return the advanced state.

    ``prev_action`` is (relation, entity reached); ``None`` means the first step.
    The new top-layer output is ``result.output``.
    """
    if len(state.hidden) != net.config.num_layers or any(
        h.shape != (net.config.hidden_size,) for h in state.hidden + state.cells
    ):
        raise DimensionMismatch("agent state does not match encoder configuration")
    if prev_action is None:
        x = encoder_input(net.params, net.d, None, None, np.array([state.source]), True)
        entity = state.entity
    else:
        r, e = prev_action
        x = encoder_input(net.params, net.d, np.array([r]), np.array([e]), np.array([state.source]), False)
        entity = int(e)
    hs, cs, _ = lstm_forward(
        net.params, net.config.num_layers, x, [h[None] for h in state.hidden], [c[None] for c in state.cells]
    )
    return AgentState(entity, state.source, tuple(h[0] for h in hs), tuple(c[0] for c in cs), state.step + 1)


@dataclass(frozen=True)
class ActionDistribution:
    actions: tuple[Action, ...]
    probs: np.ndarray
    logits: np.ndarray

    def log_prob(self, index: int) -> float:
        return float(np.log(self.probs[index]))


def action_distribution(net: PolicyNetwork, h_t, actions: Sequence[Action]) -> ActionDistribution:
    """d_t = softmax(A_t W2 ReLU(W1 h_t)) over the given admissible actions."""
    if len(actions) == 0:
        raise EmptyActionSet("no admissible actions")
    h_t = np.asarray(h_t, dtype=float).reshape(1, -1)
    if h_t.shape[1] != net.config.hidden_size:
        raise DimensionMismatch(f"hidden state width {h_t.shape[1]} != {net.config.hidden_size}")
    z, _ = policy_head(net.params, h_t)
    rel = np.array([[a.relation for a in actions]])
    ent = np.array([[a.target for a in actions]])
    logits = action_logits(net.params, net.d, z, rel, ent)
    logp, p = masked_log_softmax(logits, np.ones_like(logits, dtype=bool))
    return ActionDistribution(tuple(Action(int(a[0]), int(a[1])) for a in actions), p[0], logits[0])


def sample_action(dist: ActionDistribution, rng) -> tuple[Action, float]:
    idx = int(sample_rows(dist.probs[None], rng)[0])
    return dist.actions[idx], float(np.log(dist.probs[idx]))


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """A rolled-out walk ``entities[0] -relations[0]-> ... entities[T]`` with step log-probabilities."""

    entities: tuple[int, ...]
    relations: tuple[int, ...]
    log_probs: tuple[float, ...]
    source: int
    target: int = -1
    mask: tuple[int, int, int] | None = None
    reward: float | None = None
    version: int = 0

    @property
    def final_entity(self) -> int:
        return self.entities[-1]

    @property
    def total_log_prob(self) -> float:
        return float(sum(self.log_probs))


@dataclass
class TrajectoryBatch:
    """Column-major storage of N rollouts of equal length T."""

    sources: np.ndarray
    targets: np.ndarray
    masks: np.ndarray
    entities: np.ndarray
    relations: np.ndarray
    cols: np.ndarray
    log_probs: np.ndarray
    version: int
    rewards: np.ndarray | None = None
    cache: list | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.sources)

    @property
    def path_length(self) -> int:
        return self.relations.shape[1]

    def trajectories(self) -> list[Trajectory]:
        out = []
        for n in range(len(self)):
            m = tuple(int(x) for x in self.masks[n])
            out.append(Trajectory(
                tuple(self.entities[n].tolist()),
                tuple(self.relations[n].tolist()),
                tuple(self.log_probs[n].tolist()),
                int(self.sources[n]),
                int(self.targets[n]),
                None if m[0] < 0 else m,
                None if self.rewards is None else float(self.rewards[n]),
                self.version,
            ))
        return out

    @classmethod
    def from_trajectories(cls, kg: KnowledgeGraph, trajectories: Sequence[Trajectory]) -> "TrajectoryBatch":
        if not trajectories:
            raise ValueError("empty trajectory list")
        versions = {t.version for t in trajectories}
        if len(versions) != 1:
            raise StaleTrajectory("trajectories come from different parameter versions")
        ents = np.array([t.entities for t in trajectories], dtype=np.int64)
        rels = np.array([t.relations for t in trajectories], dtype=np.int64)
        masks = np.array([t.mask if t.mask is not None else (-1, -1, -1) for t in trajectories], dtype=np.int64)
        cols = np.zeros_like(rels)
        for s in range(rels.shape[1]):
            rel, ent, valid = kg.action_table(ents[:, s], masks)
            hit = valid & (rel == rels[:, s : s + 1]) & (ent == ents[:, s + 1 : s + 2])
            if not hit.any(axis=1).all():
                raise InvalidPath(f"step {s} of some trajectory is not an admissible action")
            cols[:, s] = hit.argmax(axis=1)
        rewards = None
        if all(t.reward is not None for t in trajectories):
            rewards = np.array([t.reward for t in trajectories], dtype=float)
        return cls(
            np.array([t.source for t in trajectories], dtype=np.int64),
            np.array([t.target for t in trajectories], dtype=np.int64),
            masks, ents, rels, cols,
            np.array([t.log_probs for t in trajectories], dtype=float),
            versions.pop(), rewards,
        )


def _mask_array(masks, n):
    if masks is None:
        return np.full((n, 3), -1, dtype=np.int64)
    m = np.asarray(masks, dtype=np.int64).reshape(-1, 3)
    if len(m) == 1 and n != 1:
        m = np.repeat(m, n, axis=0)
    return m


def _unroll(net, kg, src, masks, T, rng=None, record=None, keep_cache=False):
    """Run the policy for T steps, sampling with ``rng`` or following ``record`` = (entities, relations, cols)."""
    p_ = net.params
    L = net.config.num_layers
    n = len(src)
    hs, cs = zero_state(net, n)
    rows = np.arange(n)
    if record is None:
        ents = np.zeros((n, T + 1), dtype=np.int64)
        rels = np.zeros((n, T), dtype=np.int64)
        cols = np.zeros((n, T), dtype=np.int64)
        ents[:, 0] = src
    else:
        ents, rels, cols = record
    logps = np.zeros((n, T))
    steps = []
    for t in range(T):
        cur = ents[:, t]
        x = encoder_input(p_, net.d, rels[:, t - 1] if t else None, cur, src, t == 0)
        hs, cs, lcache = lstm_forward(p_, L, x, hs, cs)
        z, hcache = policy_head(p_, hs[-1])
        rel, ent, valid = kg.action_table(cur, masks)
        logp, p = masked_log_softmax(action_logits(p_, net.d, z, rel, ent), valid)
        if record is None:
            col = sample_rows(p, rng)
            cols[:, t] = col
            rels[:, t] = rel[rows, col]
            ents[:, t + 1] = ent[rows, col]
        else:
            col = cols[:, t]
            if not (valid[rows, col].all() and (rel[rows, col] == rels[:, t]).all()
                    and (ent[rows, col] == ents[:, t + 1]).all()):
                raise InvalidPath(f"recorded step {t} is not admissible under the current graph and mask")
        logps[:, t] = logp[rows, col]
        if keep_cache:
            steps.append(dict(lcache=lcache, hcache=hcache, h_top=hs[-1], z=z, rel=rel, ent=ent,
                              valid=valid, logp=logp, p=p))
        else:
            steps.append(dict(logp=logp, p=p, valid=valid))
    return ents, rels, cols, logps, steps


def rollout_batch(
    kg: KnowledgeGraph,
    net: PolicyNetwork,
    sources,
    T: int,
    rng,
    masks=None,
    targets=None,
    keep_cache: bool = False,
) -> TrajectoryBatch:
    """Sample ``T`` transitions for every source in parallel (STAY always admissible).

    With ``keep_cache`` the forward intermediates ride along on the batch so the
    gradient pass can skip recomputing them.
    """
    if T < 1:
        raise ValueError("path length T must be >= 1")
    src = np.asarray(sources, dtype=np.int64)
    n = len(src)
    for e in np.unique(src):
        kg.check_entity(int(e))
    masks = _mask_array(masks, n)
    tgt = np.full(n, -1, dtype=np.int64) if targets is None else np.asarray(targets, dtype=np.int64)
    ents, rels, cols, logps, steps = _unroll(net, kg, src, masks, T, rng=rng, keep_cache=keep_cache)
    batch = TrajectoryBatch(src, tgt, masks, ents, rels, cols, logps, net.version)
    if keep_cache:
        batch.cache = steps
    return batch


def rollout(kg: KnowledgeGraph, net: PolicyNetwork, e_c: int, T: int, mask=None, rng=None, target: int = -1) -> Trajectory:
    kg.check_entity(e_c)
    if rng is None:
        rng = np.random.default_rng()
    batch = rollout_batch(kg, net, [e_c], T, rng, None if mask is None else [mask], [target])
    return batch.trajectories()[0]


# ---------------------------------------------------------------------------
# REINFORCE loss and its gradient
# ---------------------------------------------------------------------------

def _replay(net: PolicyNetwork, kg: KnowledgeGraph, batch: TrajectoryBatch, keep_cache: bool):
    if keep_cache and batch.cache is not None and batch.version == net.version:
        return batch.cache
    record = (batch.entities, batch.relations, batch.cols)
    return _unroll(net, kg, batch.sources, batch.masks, batch.path_length, record=record, keep_cache=keep_cache)[4]


def _step_terms(step, col, rows):
    valid, p, logp = step["valid"], step["p"], step["logp"]
    chosen = logp[rows, col]
    plogp = np.where(valid, p * np.where(valid, logp, 0.0), 0.0)
    entropy = -plogp.sum(axis=1)
    return chosen, entropy


def reinforce_loss(net: PolicyNetwork, kg: KnowledgeGraph, batch: TrajectoryBatch, advantages, beta: float) -> float:
    """-(1/N) sum_n [adv_n sum_t log pi(A_t) + beta sum_t H(d_t)] for fixed recorded actions."""
    adv = np.asarray(advantages, dtype=float)
    rows = np.arange(len(batch))
    total = 0.0
    for t, step in enumerate(_replay(net, kg, batch, keep_cache=False)):
        chosen, ent = _step_terms(step, batch.cols[:, t], rows)
        total += np.sum(-adv * chosen - beta * ent)
    return float(total / len(batch))


def reinforce_loss_and_grad(net: PolicyNetwork, kg: KnowledgeGraph, batch: TrajectoryBatch, advantages, beta: float):
    """Loss as in :func:`reinforce_loss` plus gradients for every parameter tensor."""
    p_ = net.params
    d = net.d
    L = net.config.num_layers
    adv = np.asarray(advantages, dtype=float)
    n, T = batch.relations.shape
    rows = np.arange(n)
    steps = _replay(net, kg, batch, keep_cache=True)
    grads = {k: np.zeros_like(v) for k, v in p_.items()}
    E, R = p_["entity_emb"], p_["relation_emb"]
    nE, nR = E.shape[0], R.shape[0]

    loss = 0.0
    dh_top = []
    for t, st in enumerate(steps):
        col = batch.cols[:, t]
        chosen, entropy = _step_terms(st, col, rows)
        loss += np.sum(-adv * chosen - beta * entropy)
        valid, p = st["valid"], st["p"]
        logp0 = np.where(valid, st["logp"], 0.0)
        onehot = np.zeros_like(p)
        onehot[rows, col] = 1.0
        # d(-adv log p_a)/dlogit = -adv (onehot - p); d(-beta H)/dlogit = beta p (log p + H)
        dlogit = (-adv[:, None] * (onehot - p) + beta * p * (logp0 + entropy[:, None])) / n
        dlogit = np.where(valid, dlogit, 0.0)

        z = st["z"]
        g_r = np.bincount((rows[:, None] * nR + st["rel"]).ravel(), weights=dlogit.ravel(), minlength=n * nR).reshape(n, nR)
        g_e = np.bincount((rows[:, None] * nE + st["ent"]).ravel(), weights=dlogit.ravel(), minlength=n * nE).reshape(n, nE)
        grads["relation_emb"] += g_r.T @ z[:, :d]
        grads["entity_emb"] += g_e.T @ z[:, d:]
        dz = np.concatenate([g_r @ R, g_e @ E], axis=1)

        y, u = st["hcache"]
        grads["W2"] += dz.T @ u
        dy = (dz @ p_["W2"]) * (y > 0)
        grads["W1"] += dy.T @ st["h_top"]
        dh_top.append(dy @ p_["W1"])

    H = net.config.hidden_size
    dh_next = [np.zeros((n, H)) for _ in range(L)]
    dc_next = [np.zeros((n, H)) for _ in range(L)]
    for t in range(T - 1, -1, -1):
        lcache = steps[t]["lcache"]
        dh_above = dh_top[t]
        for l in range(L - 1, -1, -1):
            inp, h_prev, c_prev, i, f, g, o, tc = lcache[l]
            dh = dh_next[l] + dh_above
            dc = dc_next[l] + dh * o * (1.0 - tc * tc)
            dpre = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ], axis=1)
            grads[f"lstm{l}.W"] += dpre.T @ inp
            grads[f"lstm{l}.U"] += dpre.T @ h_prev
            grads[f"lstm{l}.b"] += dpre.sum(axis=0)
            dh_next[l] = dpre @ p_[f"lstm{l}.U"]
            dc_next[l] = dc * f
            dh_above = dpre @ p_[f"lstm{l}.W"]
        dx = dh_above
        if t > 0:
            np.add.at(grads["relation_emb"], batch.relations[:, t - 1], dx[:, :d])
            np.add.at(grads["entity_emb"], batch.entities[:, t], dx[:, d : 2 * d])
        np.add.at(grads["entity_emb"], batch.sources, dx[:, 2 * d :])
    return float(loss / n), grads


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(net: PolicyNetwork, path, extra: dict | None = None) -> None:
    """Layout: 8-byte magic, uint32 format version, uint64 header length (all little-endian),
    a UTF-8 JSON header, then every tensor as contiguous little-endian float64 in header order."""
    names = sorted(net.params)
    tensors, offset = [], 0
    for k in names:
        arr = net.params[k]
        tensors.append({"name": k, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = {
        "config": {
            "embedding_dim": net.config.embedding_dim,
            "hidden_size": net.config.hidden_size,
            "mlp_size": net.config.mlp_size,
            "num_layers": net.config.num_layers,
        },
        "num_entities": net.num_entities,
        "num_relations": net.num_relations,
        "vocab_hash": net.vocab_hash,
        "tensors": tensors,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.ascontiguousarray(net.params[k], dtype="<f8").tobytes())


def _read_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise VocabularyMismatch(f"{path}: not a policy checkpoint")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != CHECKPOINT_VERSION:
        raise VocabularyMismatch(f"{path}: unsupported checkpoint version {version}")
    return json.loads(data[20 : 20 + hlen].decode("utf-8")), data[20 + hlen :]


def checkpoint_header(path) -> dict:
    """The JSON header of a checkpoint (config, shapes, vocabulary hash, ``extra``)."""
    return _read_checkpoint(path)[0]


def load_checkpoint(path, kg: KnowledgeGraph | None = None) -> PolicyNetwork:
    header, body = _read_checkpoint(path)
    params = {}
    for t in header["tensors"]:
        count = int(np.prod(t["shape"])) if t["shape"] else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=t["offset"])
        params[t["name"]] = arr.astype(np.float64).reshape(t["shape"])
    net = PolicyNetwork(PolicyConfig(**header["config"]), header["num_entities"], header["num_relations"],
                        params, header["vocab_hash"])
    if kg is not None and header["vocab_hash"] != kg.vocab_hash():
        raise VocabularyMismatch(
            f"{path}: checkpoint vocabulary hash {header['vocab_hash'][:12]} does not match graph {kg.vocab_hash()[:12]}"
        )
    return net


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
