"""Multi-instance partial-label learning with Gaussian processes."""

from .baselines import PlKnnClassifier, embed_maxmin, embed_mean
from .data import (
    Bag,
    FeatureStats,
    InstanceView,
    LabelSpace,
    MiplDataset,
    Split,
    build_instance_view,
    random_split,
    read_jsonl,
    standardize_features,
    write_jsonl,
)
from .disambiguation import (
    init_alpha,
    sample_dirichlet,
    transform_targets,
    update_alpha,
)
from .errors import (
    DatasetFormatError,
    DimensionMismatchError,
    MiplgpError,
    NumericError,
)
from .estimator import MiplGpClassifier, TraceRow, write_trace_csv
from .evaluation import (
    ALGORITHM_NAMES,
    EvalReport,
    accuracy,
    make_algorithm,
    paired_t_test,
    run_experiment,
)
from .kernels import MaternKernel
from .prediction import (
    BagPrediction,
    aggregate_bag,
    mc_class_probs,
    truncate_negative,
    write_predictions_csv,
)
from .synthesis import BasePool, SynthesisConfig, load_base_pool, make_blobs, synthesize

__version__ = "0.1.0"

__all__ = [
    "ALGORITHM_NAMES",
    "Bag",
    "BagPrediction",
    "BasePool",
    "DatasetFormatError",
    "DimensionMismatchError",
    "EvalReport",
    "FeatureStats",
    "InstanceView",
    "LabelSpace",
    "MaternKernel",
    "MiplDataset",
    "MiplGpClassifier",
    "MiplgpError",
    "NumericError",
    "PlKnnClassifier",
    "Split",
    "SynthesisConfig",
    "TraceRow",
    "accuracy",
    "aggregate_bag",
    "build_instance_view",
    "embed_maxmin",
    "embed_mean",
    "init_alpha",
    "make_algorithm",
    "make_blobs",
    "mc_class_probs",
    "paired_t_test",
    "random_split",
    "read_jsonl",
    "run_experiment",
    "sample_dirichlet",
    "standardize_features",
    "synthesize",
    "transform_targets",
    "truncate_negative",
    "update_alpha",
    "write_jsonl",
    "write_predictions_csv",
    "write_trace_csv",
    "__version__",
]
