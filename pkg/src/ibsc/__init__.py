"""Zero-shot learning by constructing training samples for unseen classes.

Unseen-class samples are spliced together from real seen-class samples using
a learned attribute-to-feature relation, then screened by comparing their
distances to seen classes in feature space against the class's distances in
attribute space.
"""

from .config import PipelineConfig, load_config
from .construction import ConstructedSample, SourcePlan, build_source_plan, construct_all, pairwise_stats
from .data import AttributeTable, Dataset, SplitSpec, load_attribute_table, load_dataset, load_split
from .errors import IBSCError, NumericError, ValidationError
from .evaluation import EvalReport, build_artifacts, compare_strategies, train_unseen_classifier
from .relation import RelationMatrix, environment_dims, fit_relation
from .screening import screen_all, screen_samples
from .sparse_linear import calibrate_probability, train_l1_linear
from .synthgen import SynthConfig, generate

__all__ = [
    "AttributeTable",
    "ConstructedSample",
    "Dataset",
    "EvalReport",
    "IBSCError",
    "NumericError",
    "PipelineConfig",
    "RelationMatrix",
    "SourcePlan",
    "SplitSpec",
    "SynthConfig",
    "ValidationError",
    "build_artifacts",
    "build_source_plan",
    "calibrate_probability",
    "compare_strategies",
    "construct_all",
    "environment_dims",
    "fit_relation",
    "generate",
    "load_attribute_table",
    "load_config",
    "load_dataset",
    "load_split",
    "pairwise_stats",
    "screen_all",
    "screen_samples",
    "train_l1_linear",
    "train_unseen_classifier",
]
