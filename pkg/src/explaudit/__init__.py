"""Toolkit for studying explanation coherence of remote classifiers: train
models, serve decisions with explanations (honestly or with per-query
surrogates), and audit served models for incoherent explanation pairs.
"""

__version__ = "0.1.0"

from .audit import (AuditReport, IncoherentPair, QueryRecord, TranscriptAudit,
                    audit_transcript, check_coherence_log, confidence,
                    find_incoherent_pair, find_ip_exhaustive, is_coherent,
                    queries_needed, scenario_a_probe, scenario_b_swap)
from .dimpact import (DEPENDENCE, EIGHTY_PERCENT_RULE, INDEPENDENCE, DisparityParams,
                      ImpactPoint, emit_curves, ip_probability, p_ip_dependence,
                      p_ip_independence)
from .errors import (CapacityError, ConformanceError, DataFormatError,
                     DegenerateRateError, ExplauditError, MalformedExplanationError,
                     ProtocolError, RateLimitedError, UnsupportedDomainError)
from .explain import (Explanation, explanation_from_doc, explanation_to_doc,
                      is_apropos, is_consequent, mentions_discriminative,
                      passes_user_checks)
from .experiment import (ExperimentConfig, ExperimentResult, ModelRun, ProbeSummary,
                         load_experiment_config, run_experiment)
from .legit import (DiracSurrogate, TabulatedClassifier, TabulatedLegitClassifier,
                    count_pr_functions, dirac_surrogate, enumerate_classifiers,
                    enumerate_legit_classifiers, is_legitimate)
from .mlp import MlpModel, TrainResult, TrainSpec, gradient_check, load_mlp, save_mlp, train_mlp
from .predicates import NodePredicate, OrientedPredicate, make_eq, make_in, make_le
from .service import (ClassifyService, MlpBackend, RateLimiter, RemoteOracle,
                      TreeBackend, handle_classify, make_server, remote_oracle)
from .space import (Categorical, FeatureSpace, FeatureSpec, Instance, IntRange,
                    RealInterval, merge_parts, split_instance)
from .tree import (DecisionTree, Leaf, Node, TrainConfig, load_tree, load_training_csv,
                   path_explanation, pr_attack_prune, save_tree, train,
                   uses_discriminative)
