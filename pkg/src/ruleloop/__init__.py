"""Interactive weak supervision: rule mining, teacher-student training,
and budgeted expert querying."""

from .corpus import (
    Corpus,
    CorpusError,
    FeatureAtom,
    Instance,
    ingest_sidecar,
    load_corpus,
    load_templates,
    save_corpus,
)
from .features import FeatureIndex, annotate_ngrams, build_index, extract_ngrams, tokenize
from .rules import LabelMatrix, Rule, RuleStats, build_label_matrix, compute_stats, evaluate
from .rulegen import RuleGenParams, extract_candidates, select_for_query
from .teacher import TeacherOutput, dawid_skene, majority_vote
from .student import SoftDataset, StudentHyper, StudentModel, loss_and_gradient, predict_proba, train
from .sampling import ClusterTree, SamplerState, build_hierarchy, select_batch
from .session import (
    Budget,
    SessionConfig,
    SessionResult,
    SessionState,
    run_active_learning,
    run_iteration,
    run_session,
    simulated_oracle,
)
from .analysis import PCRecord, PCWeights, fit_pc_weights, macro_f1, sweep_teachers, teacher_pc

__version__ = "0.1.0"
