from .cnn import CnnClassifier, CnnConfig, cnn_spec, cnn_train
from .evaluate import (
    CLASSIFIERS,
    CvRun,
    EvalResult,
    FoldError,
    FoldOutcome,
    PipelineSpec,
    cross_validate,
    default_cnn_grid,
    format_mean_std,
    grid_search,
    grid_search_cnn,
    run_fold,
)
from .gbdt import GbdtConfig, GbdtModel, Node, best_split, fit_boosted_trees, gbdt_train, split_gain
from .metrics import auc, roc_curve, write_roc_svg
