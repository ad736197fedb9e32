"""Relational churn prediction on call-detail-record graphs.

Typical flow::

    from churnnet import SynthConfig, generate, Timeline, GraphSpec, frame, auc

    store, _ = generate(SynthConfig(n_customers=2000, sparsity=5e-3, homophily=0.8))
    tl = Timeline(store)
    s = tl.score("no-wvrn", GraphSpec(), frame("short"))
    print(auc(*tl.evaluation(s, 5)))
"""
from .cdr import (CdrRecord, CdrSchema, CdrStore, ChurnLabels, filter_short_calls, label_churn,
                  make_store, month_interval, monthly_labels, parse_cdr, partition_months, write_cdr)
from .classify import LogisticClassifier, OotWindows, TrainedModel, fit_logistic, oversample, predict, run_oot
from .exceptions import (AlignmentError, ChurnNetError, ConfigError, FittingError, LeakageError, MetricError,
                         PretrainingError, RangeError, SamplingError, SchemaError)
from .features import FeatureTable, assemble, degree_features, link_based, network_features, rfm_features, \
    transitivity, triangle_features
from .graph import CallGraph, SegmentSpec, build_graph, filter_reciprocal, from_edges, paper_segmentations, sparsity
from .metrics import EmpParams, auc, emp, lift, mp
from .pipeline import Frame, GraphSpec, Timeline, frame
from .relational import (ALL_LEARNERS, CiConfig, cdrn, cdrn_pretrain, nlb, nlb_pretrain, run_ci, run_learner,
                         sensitivity_trace, spa_rc, wvrn)
from .states import LabelState, ScoreState
from .stats import RankMatrix, average_ranks, friedman, kruskal_wallis, nemenyi
from .synth import SynthConfig, generate, verify

__version__ = "0.1.0"
