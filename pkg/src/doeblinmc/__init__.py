"""Restart (strong Doeblin) Markov chains on discrete pairwise MRFs."""

from .chain import (
    DENSE_CAP,
    FIXED_POINT_TOL,
    MASS_TOL,
    DenseDistribution,
    DenseKernel,
    NonErgodicError,
    SizeCapError,
    StateSpace,
    apply,
    empirical_distribution,
    stationary_of,
    stationary_power,
    tv_distance,
)
from .learning import (
    DivergenceError,
    GradientEstimate,
    RestartPath,
    TrainConfig,
    cd_gradient,
    grad_loglik_estimate,
    grad_loglik_fd,
    loglik_exact,
    mean_loglik_exact,
    restart_stationary,
    sample_posterior_path,
    sgd_train,
)
from .models import (
    GibbsKernel,
    PairwiseModel,
    ReferenceModel,
    chain_edges,
    conditional,
    dense_gibbs_kernel,
    exact_distribution,
    features,
    fit_reference,
    gibbs_step,
    grad_step_logprob,
    grid_edges,
    kernel_logprob,
    random_model,
    unnorm_logp,
)
from .restart import (
    DoeblinChain,
    RestartEvent,
    approximation_gap,
    contraction_check,
    mixing_curve,
    sample_restart_time,
    sample_stationary,
    stationary_dense,
    wrapped_kernel,
    wrapped_step,
)
from .seeding import derive_rng

__version__ = "0.1.0"
