"""Gradient-free training and depth diagnostics for linearized graph convolution models."""

from .data import LabeledDataset, Split, load_dataset, load_split, make_split, save_split, synth_sbm, write_dataset
from .diagnostics import (
    LimitReport,
    build_limit_report,
    centered_norm_curve,
    dgc_limit_residual,
    matrix_exponential,
    ssgc_limit_residual,
    vanishing_verdict,
)
from .errors import ConfigError, DataError, GflinError, NumericalError
from .filters import (
    DEFAULT_TAU,
    DEFAULT_TERMINAL_TIME,
    FilterConfig,
    FilterMatrix,
    compute_filter,
    load_filter_cache,
    save_filter_cache,
    zero_center,
)
from .graph import Graph, NormalizedAdjacency, build_graph, is_connected_non_bipartite, normalize
from .logreg import LogRegModel, OptimizerConfig, gradient_stats, nll_loss_and_grad, predict_labels, train
from .solver import (
    DEFAULT_LAMBDA_GRID,
    KernelModel,
    KernelSpec,
    check_scale_invariance,
    fit,
    fit_primal_linear,
    kernel_matrix,
    load_model,
    predict,
    save_model,
    select_lambda,
)

__version__ = "0.1.0"
