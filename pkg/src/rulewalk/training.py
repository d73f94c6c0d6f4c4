"""Rule-augmented terminal reward and REINFORCE training of the walk policy."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, EmptyQuerySet, NumericalError, StaleTrajectory
from .graph import KnowledgeGraph, add_inverse_relations
from .policy import (
    PolicyNetwork,
    Trajectory,
    TrajectoryBatch,
    init_policy,
    reinforce_loss_and_grad,
    rollout_batch,
)
from .rules import RuleIndex, RuleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    rollouts_per_query: int = 40
    batch_size: int = 8
    num_updates: int = 3000
    entropy_beta: float = 0.02
    baseline_decay: float = 0.95
    path_length: int = 3
    rule_weight: float = 1.0
    seed: int = 0
    embedding_dim: int = 64
    hidden_size: int = 128
    mlp_size: int = 128
    num_layers: int = 2
    grad_clip: float = 5.0
    beam_width: int = 100
    aggregate: str = "max"
    head_relation: str = "treats"
    source_type: str = "Compound"
    target_type: str = "Disease"
    log_wall_time: bool = False

    def __post_init__(self):
        positive = ("learning_rate", "rollouts_per_query", "batch_size", "num_updates", "path_length",
                    "embedding_dim", "hidden_size", "mlp_size", "num_layers", "beam_width")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.entropy_beta < 0:
            raise ConfigError("entropy_beta must be >= 0")
        if self.rule_weight < 0:
            raise ConfigError("rule_weight (lambda) must be >= 0")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ConfigError("baseline_decay must lie in [0, 1)")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip must be >= 0 (0 disables clipping)")
        if self.aggregate not in ("max", "sum"):
            raise ConfigError("aggregate must be 'max' or 'sum'")


CONFIG_DOC = {
    "learning_rate": "Adam step size",
    "rollouts_per_query": "rollouts sampled per training query",
    "batch_size": "queries per update",
    "num_updates": "total parameter updates",
    "entropy_beta": "entropy bonus weight (0 = plain REINFORCE)",
    "baseline_decay": "EMA decay of the reward baseline",
    "path_length": "walk length T",
    "rule_weight": "lambda, weight of the rule bonus in the reward",
    "seed": "master seed",
    "embedding_dim": "entity/relation embedding width d",
    "hidden_size": "LSTM hidden width",
    "mlp_size": "width of the ReLU projection",
    "num_layers": "stacked LSTM layers",
    "grad_clip": "global gradient-norm clip (0 disables)",
    "beam_width": "beam width at inference",
    "aggregate": "max or sum over paths reaching the same entity",
    "head_relation": "relation being predicted",
    "source_type": "type of query entities",
    "target_type": "type of candidate answers",
    "log_wall_time": "include wall-clock seconds in the training log",
}


def parse_config_text(text: str, where: str = "<config>") -> TrainerConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; unknown keys are an error."""
    fields = {f.name: f for f in dataclasses.fields(TrainerConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"{where}:{lineno}: unknown key {key!r}")
        default = fields[key].default
        try:
            if isinstance(default, bool):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                values[key] = value.lower() in ("true", "1", "yes")
            elif isinstance(default, int):
                values[key] = int(value)
            elif isinstance(default, float):
                values[key] = float(value)
            else:
                values[key] = value.strip("\"'")
        except ValueError:
            raise ConfigError(f"{where}:{lineno}: bad value {value!r} for {key}") from None
    return TrainerConfig(**values)


def load_config(path) -> TrainerConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), str(path))


def format_config(config: TrainerConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# reward
# ---------------------------------------------------------------------------

def compute_reward(trajectory: Trajectory, rules: RuleSet, lam: float, kg: KnowledgeGraph) -> float:
    """1{e_{T+1} = e_d} * (1 + lam * sum_i S(M_i) 1{metapath == M_i})."""
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    if trajectory.final_entity != trajectory.target:
        return 0.0
    score = RuleIndex(kg, rules).score(trajectory.entities, trajectory.relations)
    return 1.0 + lam * (score or 0.0)


def batch_rewards(batch: TrajectoryBatch, index: RuleIndex, lam: float):
    """Rewards, hit flags and rule-match flags for every rollout in the batch."""
    hits = batch.entities[:, -1] == batch.targets
    matched, scores = index.match_scores(batch.entities, batch.relations)
    rewards = hits * (1.0 + lam * scores)
    return rewards, hits, matched


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, params: dict, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class MovingAverageBaseline:
    value: float = 0.0
    decay: float = 0.95

    def updated(self, mean_reward: float) -> "MovingAverageBaseline":
        return MovingAverageBaseline(self.decay * self.value + (1.0 - self.decay) * mean_reward, self.decay)


@dataclass
class UpdateResult:
    loss: float
    baseline: MovingAverageBaseline
    grad_norm: float


def reinforce_update(
    net: PolicyNetwork,
    kg: KnowledgeGraph,
    batch: TrajectoryBatch | Sequence[Trajectory],
    baseline: MovingAverageBaseline,
    config: TrainerConfig,
    optimizer: Adam | None = None,
) -> UpdateResult:
    """One gradient step on -E[(R - b) sum_t log pi(A_t)] - beta * entropy; parameters change in place."""
    if not isinstance(batch, TrajectoryBatch):
        batch = TrajectoryBatch.from_trajectories(kg, batch)
    if batch.version != net.version:
        raise StaleTrajectory(f"batch rolled out under version {batch.version}, policy is at {net.version}")
    if batch.rewards is None:
        raise ValueError("trajectories carry no rewards")
    if optimizer is None:
        optimizer = Adam(net.params, config.learning_rate)
    advantages = batch.rewards - baseline.value
    loss, grads = reinforce_loss_and_grad(net, kg, batch, advantages, config.entropy_beta)
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if not np.isfinite(norm) or not np.isfinite(loss):
        raise NumericalError(f"non-finite loss/gradient at policy version {net.version}")
    if config.grad_clip > 0 and norm > config.grad_clip:
        scale = config.grad_clip / norm
        for g in grads.values():
            g *= scale
    optimizer.step(net.params, grads)
    for k, v in net.params.items():
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"parameter {k} became non-finite after update {net.version}")
    net.version += 1
    return UpdateResult(loss, baseline.updated(float(np.mean(batch.rewards))), norm)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def prepare_graph(kg: KnowledgeGraph) -> KnowledgeGraph:
    return kg if kg.augmented else add_inverse_relations(kg)


def train(
    kg: KnowledgeGraph,
    rules: RuleSet,
    train_queries: Sequence[tuple[int, int]],
    config: TrainerConfig,
    on_step: Callable[..., None] | None = None,
) -> tuple[PolicyNetwork, list[dict]]:
    """Train a fresh policy on (compound, disease) queries; returns the policy and one log record per update."""
    if len(train_queries) == 0:
        raise EmptyQuerySet("no training queries")
    if rules.max_body_length > config.path_length:
        raise ConfigError(f"path_length {config.path_length} shorter than longest rule body {rules.max_body_length}")
    kg = prepare_graph(kg)
    if not kg.vocab.has_relation(config.head_relation):
        raise ConfigError(f"head relation {config.head_relation!r} not in graph")
    head = kg.vocab.relation_id(config.head_relation)
    queries = np.asarray(train_queries, dtype=np.int64).reshape(-1, 2)
    for e in np.unique(queries):
        kg.check_entity(int(e))

    init_seed, run_seed = np.random.SeedSequence(config.seed).spawn(2)
    net = init_policy(kg, config.embedding_dim, config.hidden_size, config.mlp_size, config.num_layers,
                      seed=np.random.default_rng(init_seed))
    rng = np.random.default_rng(run_seed)
    index = RuleIndex(kg, rules)
    optimizer = Adam(net.params, config.learning_rate)
    baseline = MovingAverageBaseline(0.0, config.baseline_decay)
    k = config.rollouts_per_query
    history = []
    t0 = time.perf_counter()
    for step in range(1, config.num_updates + 1):
        q = queries[rng.integers(0, len(queries), size=config.batch_size)]
        src = np.repeat(q[:, 0], k)
        tgt = np.repeat(q[:, 1], k)
        masks = np.stack([src, np.full_like(src, head), tgt], axis=1)
        batch = rollout_batch(kg, net, src, config.path_length, rng, masks=masks, targets=tgt, keep_cache=True)
        rewards, hits, matched = batch_rewards(batch, index, config.rule_weight)
        batch.rewards = rewards
        result = reinforce_update(net, kg, batch, baseline, config, optimizer)
        baseline = result.baseline
        n_hits = int(hits.sum())
        record = {
            "step": step,
            "mean_reward": float(rewards.mean()),
            "hit_fraction": n_hits / len(hits),
            "rule_match_fraction": float((hits & matched).sum() / n_hits) if n_hits else 0.0,
            "loss": result.loss,
            "baseline": baseline.value,
        }
        if config.log_wall_time:
            record["wall_time"] = round(time.perf_counter() - t0, 3)
        history.append(record)
        if on_step is not None:
            on_step(record, net)
        if step % 100 == 0:
            log.debug("step %d reward %.3f hits %.3f", step, record["mean_reward"], record["hit_fraction"])
    return net, history


def format_log_record(record: dict) -> str:
    return json.dumps(record, sort_keys=False, separators=(",", ":"))
