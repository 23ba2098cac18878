"""codasep: discriminant feature screening for compositional count data.

Pipeline: filter rare features, impute zeros, then score every pairwise
log-ratio by the AUC of a (multinomial) logistic fit, rank features by
their AUC-matrix column sums, and select the top-k set maximizing the
separability index S_k, with analytic and bootstrap uncertainty. A
penalized log-contrast model over all pairwise log-ratios complements
the screen with a global sparse signature.
"""

from .auc import (
    AucEstimate,
    VarianceMethod,
    binary_auc,
    estimate_binary,
    hand_till_auc,
    hand_till_components,
    shared_class_covariances,
    var_delong,
    var_handtill,
    var_hanley,
)
from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_s,
    estimate_rho_empirical,
)
from .datamodel import (
    CountTable,
    CovariateMatrix,
    Dataset,
    Labels,
    read_count_table,
    read_metadata,
    write_count_table,
)
from .enet import CvResult, EnetConfig, EnetFit, cv_select_lambda, fit_enet_logistic
from .errors import CodasepError, DataFormatError, MemoryBudgetError, ValidationError
from .glm import GlmFit, GlmSpec, class_scores, fit_multinomial, positive_scores
from .preprocess import (
    ClrMatrix,
    Composition,
    LogRatioDesign,
    PairIndex,
    clr_transform,
    filter_rare,
    impute_zeros,
    logratio_design,
    pairwise_logratio,
)
from .screening import (
    AucMatrix,
    ScreeningConfig,
    SeparabilityReport,
    build_report,
    compute_auc_matrix,
    rank_features,
    select_k,
    separability_curve,
    var_s_k,
)
from .simdata import SimSpec, simulate

__version__ = "0.1.0"

__all__ = [
    "AucEstimate",
    "AucMatrix",
    "BootstrapConfig",
    "BootstrapResult",
    "ClrMatrix",
    "CodasepError",
    "Composition",
    "CountTable",
    "CovariateMatrix",
    "CvResult",
    "DataFormatError",
    "Dataset",
    "EnetConfig",
    "EnetFit",
    "GlmFit",
    "GlmSpec",
    "Labels",
    "LogRatioDesign",
    "MemoryBudgetError",
    "PairIndex",
    "ScreeningConfig",
    "SeparabilityReport",
    "SimSpec",
    "ValidationError",
    "VarianceMethod",
    "binary_auc",
    "bootstrap_s",
    "build_report",
    "class_scores",
    "clr_transform",
    "compute_auc_matrix",
    "cv_select_lambda",
    "estimate_binary",
    "estimate_rho_empirical",
    "filter_rare",
    "fit_enet_logistic",
    "fit_multinomial",
    "hand_till_auc",
    "hand_till_components",
    "impute_zeros",
    "logratio_design",
    "pairwise_logratio",
    "positive_scores",
    "rank_features",
    "read_count_table",
    "read_metadata",
    "select_k",
    "separability_curve",
    "shared_class_covariances",
    "simulate",
    "var_delong",
    "var_handtill",
    "var_hanley",
    "var_s_k",
    "write_count_table",
]
