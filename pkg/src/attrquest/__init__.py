"""Interactive attribute-based item retrieval with hierarchical dialog
policies that mix clarification questions and active-learning queries."""

from .corpus import (
    AttributeCatalog,
    Corpus,
    GenConfig,
    Item,
    SplitCorpus,
    generate_corpus,
    load_corpus,
    make_split_corpus,
    save_corpus,
)
from .classifier import (
    AttributeStats,
    ClassifierParams,
    LabelStore,
    TrainConfig,
    forward,
    incremental_update,
    init_params,
    pretrain,
    prob_matrix,
    restore,
    snapshot,
    tune_thresholds,
)
from .grounding import (
    BeliefState,
    BeliefSummary,
    RetrievalConfig,
    belief_summary,
    compute_belief,
    guess,
    info_gain,
    retrieval_rank,
    update_belief,
)
from .env import Answer, DialogAction, DialogEnv, EpisodeSetup, RewardConfig, episode_return
from .features import DialogHistoryStats, FeatureConfig, FeatureExtractor
from .policies import (
    PolicyBundle,
    StaticPolicyConfig,
    hierarchical_act,
    load_checkpoint,
    make_bundle,
    save_checkpoint,
    train_from_batch,
)
from .experiment import (
    BatchMetrics,
    ExperimentConfig,
    ExperimentResult,
    emit_reports,
    run_experiment,
)

__version__ = "0.1.0"
