"""Samplers and exact-oracle benchmarks for discrete flow models.

A desk-scale harness: explicit joint tables stand in for learned models,
so every sampler in the family (uniformization, tau-leaping, Euler, the
time- and location-corrected schemes, and their general-conditional-rate
variants) can be validated against analytically exact marginals,
posteriors, and exit-time laws.
"""

from .core import (
    CapacityError,
    ConfigError,
    CosineSchedule,
    DomainError,
    LinearSchedule,
    State,
    StateSpace,
    TimeGrid,
    TimeSchedule,
    get_schedule,
    make_optimal_linear_grid,
    make_uniform_grid,
    rate_factor,
    schedule_kappa,
    schedule_kappa_dot,
    schedule_kappa_inv,
)
from .distributions import (
    BlockIndependentTable,
    JointTable,
    SourceKind,
    SourceSpec,
    blockwise_ar1,
    joint_marginal,
    load_table,
    sample_joint,
    save_table,
    source_pmf,
)
from .evaluation import (
    SamplerSetting,
    SweepRecord,
    empirical_pmf,
    empirical_tv,
    one_step_kernel_oracle,
    sweep,
    write_csv,
)
from .gridopt import RateBoundProfile, build_grid, constant_product_grid, rate_bound
from .path import (
    ConstantPosterior,
    ExactPosterior,
    MixturePath,
    PerturbedPosterior,
    PosteriorEval,
    PosteriorModel,
    UnreachableStateError,
    conditional_path_prob,
    conditional_rate,
    exact_marginal,
    exact_posterior,
    oracle_rate,
    perturbed_posterior,
    posterior_rows_batch,
    posterior_table,
)
from .samplers import (
    BatchResult,
    ConditionalRate,
    MixtureConditionalRate,
    SamplerKind,
    SamplerSpec,
    Trajectory,
    euler_general_step,
    euler_step,
    location_corrected_general_step,
    location_corrected_step,
    run_batch,
    run_trajectory,
    sample_exit_time,
    step_batch,
    tau_leaping_step,
    time_corrected_general_step,
    time_corrected_step,
    uniformization_run,
)

__version__ = "0.1.0"
