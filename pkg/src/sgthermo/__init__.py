"""Stochastic-gradient MCMC with per-dimension thermostats and splitting integrators."""

from .core import (
    DivergenceError,
    GradientModel,
    MinibatchSchedule,
    SamplerState,
    make_minibatch_schedule,
    stochastic_neg_log_posterior_grad,
)
from .diagnostics import (
    DensityEstimate,
    SweepResult,
    double_well_true_density,
    finite_difference_grad,
    fit_power_law,
    histogram_density,
    kl_divergence,
    order_sweep,
    posterior_average,
    thermostat_summary,
)
from .integrators import (
    KINDS,
    IntegratorConfig,
    Trace,
    msgnht_euler_step,
    msgnht_split_step,
    run_chain,
    sghmc_euler_step,
    sghmc_split_step,
    sgld_step,
)
from .models import (
    DoubleWellModel,
    GaussianModel,
    LogisticRegressionModel,
    MlpModel,
    double_well_grad,
    double_well_potential,
)
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "GradientModel",
    "MinibatchSchedule",
    "SamplerState",
    "make_minibatch_schedule",
    "stochastic_neg_log_posterior_grad",
    "DensityEstimate",
    "SweepResult",
    "double_well_true_density",
    "finite_difference_grad",
    "fit_power_law",
    "histogram_density",
    "kl_divergence",
    "order_sweep",
    "posterior_average",
    "thermostat_summary",
    "KINDS",
    "IntegratorConfig",
    "Trace",
    "msgnht_euler_step",
    "msgnht_split_step",
    "run_chain",
    "sghmc_euler_step",
    "sghmc_split_step",
    "sgld_step",
    "DoubleWellModel",
    "GaussianModel",
    "LogisticRegressionModel",
    "MlpModel",
    "double_well_grad",
    "double_well_potential",
    "RngStream",
    "__version__",
]
