"""Nonparametric estimation of multi-view latent variable models via kernel embeddings."""

from .cv import cross_validate_bandwidth, default_grids
from .data import MultiViewDataset, ingest_csv, write_dataset
from .em import GaussianMixtureModel, em_gmm
from .errors import (
    ComponentDegeneracyError,
    ConditioningError,
    DegenerateTensorError,
    InputError,
    NumericalError,
    ParseError,
    RankDeficiencyError,
)
from .experiment import ExperimentConfig, ResultRecord, run_experiment
from .kernels import KernelSpec, gram_matrix, incomplete_cholesky, median_heuristic
from .metrics import fscore, model_mse, mse_metric
from .recovery import (
    KernelMixtureModel,
    MixtureEstimate,
    conditional_density,
    eval_conditional_density,
    fit_kernel_model,
    fit_multiview,
    fit_symmetric,
    load_model,
    map_assign,
    recover_parameters,
    save_model,
)
from .spectral import (
    fit_whitening,
    kernel_svd,
    population_whitening,
    stack_pair_grams,
    symmetrize_views,
    whiten_population,
    whitened_tensor,
)
from .synth import SyntheticSpec, default_mixing, get_preset, sample_dataset, true_density
from .tensor_power import EigenPairs, PowerConfig, tensor_eigen

__version__ = "0.1.0"
