"""Policy-guided walks over typed knowledge graphs, rewarded by metapath rules."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError, RulewalkError
from .evaluation import EvaluationReport, evaluate, filtered_rank
from .graph import (
    Action,
    KnowledgeGraph,
    Vocabulary,
    add_inverse_relations,
    available_actions,
    graph_stats,
    load_graph,
    write_graph,
)
from .inference import BeamConfig, beam_search, rank_queries, rank_targets
from .policy import (
    PolicyConfig,
    PolicyNetwork,
    Trajectory,
    TrajectoryBatch,
    init_policy,
    load_checkpoint,
    rollout,
    rollout_batch,
    save_checkpoint,
)
from .rules import InstancePath, Metapath, Rule, RuleIndex, RuleSet, estimate_confidence, metapath_of, parse_rules
from .synthetic import SyntheticGraphConfig, generate_synthetic
from .training import TrainerConfig, compute_reward, reinforce_update, train
