"""Graph signal processing and spectral graph-convolution learning toolkit.

Pipeline: infer a correlation graph from node signals, coarsen it into a
pooling hierarchy, then train a Chebyshev-filtered convolutional
classifier over it — all in plain numpy/scipy with seeded determinism.
"""
from ._version import __version__
from .benchmark import BenchmarkRow, run_benchmark, write_benchmark_csv
from .coarsening import (CoarseningHierarchy, Matching, build_hierarchy,
                         coarsen_once, heavy_edge_matching, permute_signal,
                         pool, write_hierarchy_json)
from .data import (SyntheticSpec, generate_synthetic, load_dataset,
                   load_signals_csv, write_dataset, write_signals_csv)
from .errors import (CapabilityError, ChebnetError, ConfigurationError,
                     ContractError, DimensionError, DomainError,
                     TrainingDivergedError, ValidationError)
from .graph import (COMBINATORIAL, NORMALIZED, CorrMatrix, LaplacianOp,
                    SignalMatrix, SparseGraph, estimate_lambda_max,
                    infer_graph, laplacian, pearson_correlation,
                    read_edge_list_csv, rescale, rescaled_laplacian,
                    write_edge_list_csv)
from .manifest import RunManifest, create_manifest, read_manifest, write_manifest
from .network import (ChebNetModel, ForwardCache, NetworkConfig, backward,
                      forward, init_model, load_model, predict, save_model)
from .spectral import (CHEBYSHEV, MONOMIAL, FilterCoefficients, NodeSignal,
                       chebyshev_filter, chebyshev_from_monomial,
                       exact_spectral_filter, fourier_basis)
from .training import (Dataset, ExperimentReport, LearningCurve,
                       OptimizerState, RunRecord, TrainConfig, baseline_graph,
                       cross_entropy_loss, cross_validate, evaluate,
                       optimizer_step, read_report_json, resolve_graph,
                       stratified_folds, train, write_curve_csv,
                       write_report_json)

__all__ = [
    "__version__",
    "BenchmarkRow", "run_benchmark", "write_benchmark_csv",
    "CoarseningHierarchy", "Matching", "build_hierarchy", "coarsen_once",
    "heavy_edge_matching", "permute_signal", "pool", "write_hierarchy_json",
    "SyntheticSpec", "generate_synthetic", "load_dataset", "load_signals_csv",
    "write_dataset", "write_signals_csv",
    "CapabilityError", "ChebnetError", "ConfigurationError", "ContractError",
    "DimensionError", "DomainError", "TrainingDivergedError", "ValidationError",
    "COMBINATORIAL", "NORMALIZED", "CorrMatrix", "LaplacianOp", "SignalMatrix",
    "SparseGraph", "estimate_lambda_max", "infer_graph", "laplacian",
    "pearson_correlation", "read_edge_list_csv", "rescale",
    "rescaled_laplacian", "write_edge_list_csv",
    "RunManifest", "create_manifest", "read_manifest", "write_manifest",
    "ChebNetModel", "ForwardCache", "NetworkConfig", "backward", "forward",
    "init_model", "load_model", "predict", "save_model",
    "CHEBYSHEV", "MONOMIAL", "FilterCoefficients", "NodeSignal",
    "chebyshev_filter", "chebyshev_from_monomial", "exact_spectral_filter",
    "fourier_basis",
    "Dataset", "ExperimentReport", "LearningCurve", "OptimizerState",
    "RunRecord", "TrainConfig", "baseline_graph", "cross_entropy_loss",
    "cross_validate", "evaluate", "optimizer_step", "read_report_json",
    "resolve_graph", "stratified_folds", "train", "write_curve_csv",
    "write_report_json",
]
