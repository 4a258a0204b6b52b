"""Budget-constrained submodular list prediction.

Selection policies are trained to imitate clairvoyant greedy construction
of item lists under a byte budget, with either a shared online ranker, one
ranker per list position, or randomized weighted majority over a finite
policy class; a certification harness checks the accompanying guarantees
numerically on small instances.
"""

from ._kernels import BACKEND as kernel_backend
from .bounds import (
    BoundReport,
    MixtureGuaranteeReport,
    StochasticListSpec,
    check_mixture_guarantee,
    competitive_ratio_bound,
    convex_surrogate_gap,
    exhaustive_optimal_policy_list,
    mean_gain_bound,
    stochastic_gain_bound,
    stochastic_list_value,
)
from .features import (
    CandidateFeatures,
    FEATURE_DIM,
    FeatureContext,
    TfIdfModel,
    assemble_features,
    build_feature_context,
    build_tfidf,
    gram_det_similarity,
)
from .learners import (
    CostSensitiveExample,
    LinearRanker,
    RWMState,
    RankingPair,
    hedge_eta,
    hedge_regret_bound,
    reduce_to_ranking,
    rwm_policy_loss,
)
from .listpred import (
    EvalSummary,
    PolicyBundle,
    ProblemInstance,
    TrainConfig,
    construct_list,
    evaluate_policy,
    load_bundle,
    make_examples,
    position_weight,
    save_bundle,
    train,
)
from .rewards import (
    CoverageReward,
    InstanceTooLargeError,
    Item,
    ItemList,
    RewardFunction,
    RougeRecallReward,
    SubmodularityReport,
    UnknownItemError,
    brute_force_optimal,
    check_monotone_submodular,
    evaluate,
    greedy_clairvoyant,
    marginal_benefit,
    normalized_benefit,
    uniform_triple_sampler,
)
from .rouge import RougeScores, rouge1

__version__ = "0.1.0"
