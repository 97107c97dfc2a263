"""Density estimation, KL divergence, posterior averages, and stepsize sweeps."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import DivergenceError, GradientModel, SamplerState
from .integrators import IntegratorConfig, Trace, run_chain
from .models import double_well_potential
from .rng import RngStream

KL_SMOOTHING_EPS = 1e-10


class EmptyEstimateError(ValueError):
    """No samples fell inside the histogram range."""


@dataclass(frozen=True)
class DensityEstimate:
    """Gridded probability masses on uniform bins; ``overflow`` counts out-of-range samples."""

    edges: np.ndarray
    masses: np.ndarray
    overflow: int = 0


def histogram_density(samples, lo: float, hi: float, bins: int) -> DensityEstimate:
    """Normalized histogram over [lo, hi]; out-of-range samples go to the overflow count."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not lo < hi:
        raise ValueError("need lo < hi")
    samples = np.asarray(samples, dtype=np.float64).ravel()
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    in_range = int(counts.sum())
    if in_range == 0:
        raise EmptyEstimateError("no samples inside the histogram range")
    return DensityEstimate(edges=edges, masses=counts / in_range, overflow=len(samples) - in_range)


def double_well_true_density(
    lo: float = -6.0, hi: float = 5.0, bins: int = 200, refine: int = 10
) -> DensityEstimate:
    """Per-bin masses of exp(-U) for the double well, by composite Simpson quadrature.

    Each bin is refined into ``refine`` sub-intervals (must be even); masses are
    normalized by the total quadrature integral over [lo, hi].
    """
    if refine % 2 != 0 or refine < 2:
        raise ValueError("refine must be a positive even integer")
    edges = np.linspace(lo, hi, bins + 1)
    pts = np.linspace(lo, hi, bins * refine + 1)
    f = np.exp(-double_well_potential(pts))
    w = np.ones(refine + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    dx = (hi - lo) / (bins * refine)
    idx = np.arange(bins)[:, None] * refine + np.arange(refine + 1)[None, :]
    bin_integrals = (f[idx] * w).sum(axis=1) * dx / 3.0
    return DensityEstimate(edges=edges, masses=bin_integrals / bin_integrals.sum())


def kl_divergence(p: DensityEstimate, q: DensityEstimate) -> float:
    """KL(p || q) on a shared grid; zero bins get 1e-10 mass, then renormalize."""
    if len(p.edges) != len(q.edges) or not np.array_equal(p.edges, q.edges):
        raise ValueError("density estimates live on different grids")
    pm = np.where(p.masses > 0.0, p.masses, KL_SMOOTHING_EPS)
    qm = np.where(q.masses > 0.0, q.masses, KL_SMOOTHING_EPS)
    pm = pm / pm.sum()
    qm = qm / qm.sum()
    return float(np.sum(pm * np.log(pm / qm)))


def posterior_average(trace: Trace, test_function: Callable[[np.ndarray], float]) -> float:
    """Arithmetic mean of the test function over the recorded states."""
    if len(trace) == 0:
        raise ValueError("trace holds no recorded states")
    return float(np.mean([test_function(theta) for theta in trace.thetas]))


def thermostat_summary(trace: Trace, tail_fraction: float = 0.2) -> float:
    """Mean of the per-state thermostat average over the trailing fraction of the trace."""
    if len(trace) == 0:
        raise ValueError("trace holds no recorded states")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must be in (0, 1]")
    k = max(1, int(tail_fraction * len(trace)))
    return float(trace.xi_means[-k:].mean())


def finite_difference_grad(
    f: Callable[[np.ndarray], float], theta: np.ndarray, eps: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient oracle for testing analytic gradients."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        step = np.zeros_like(theta)
        step[i] = eps
        grad[i] = (f(theta + step) - f(theta - step)) / (2.0 * eps)
    return grad


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log y against log x, with its standard error.

    Recovers the exponent of exact power laws to floating-point accuracy; the
    standard error is 0 for a 2-point fit (no residual degrees of freedom).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need at least two (x, y) pairs")
    if (x <= 0).any() or (y <= 0).any():
        raise ValueError("power-law fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    dx = lx - lx.mean()
    slope = float(np.dot(dx, ly - ly.mean()) / np.dot(dx, dx))
    n = len(x)
    if n == 2:
        return slope, 0.0
    resid = ly - (ly.mean() + slope * dx)
    sigma2 = float(np.dot(resid, resid)) / (n - 2)
    return slope, float(np.sqrt(sigma2 / np.dot(dx, dx)))


@dataclass
class SweepResult:
    """Bias and MSE of a sampler across stepsizes, with the fitted log-log slopes.

    ``fit_mask`` marks the stepsizes where the measured bias dominated the
    replicate Monte Carlo error (and the chain did not diverge); only those
    enter the slope fits. ``diverged_h`` lists excluded stepsizes.
    """

    h_values: np.ndarray
    bias_values: np.ndarray
    mse_values: np.ndarray
    stderr_values: np.ndarray
    fitted_slope: float
    slope_stderr: float
    mse_slope: float
    fit_mask: np.ndarray
    diverged_h: list = field(default_factory=list)


def order_sweep(
    model: GradientModel,
    kinds: Sequence[str],
    h_values: Sequence[float],
    steps_per_h: "int | Sequence[int]",
    test_function: Callable[[np.ndarray], float],
    true_average: float,
    replicates: int,
    rng: RngStream,
    D: float = 1.0,
    burn_in_fraction: float = 0.1,
    thinning: int = 1,
) -> dict[str, SweepResult]:
    """Measure the systematic error of long-run sample averages across stepsizes.

    For each kind and stepsize ``replicates`` independent chains run for the
    configured number of steps; bias is the absolute error of the
    replicate-averaged estimate |mean_r(phi_hat_r) - true|, MSE the replicate
    mean of the squared error. Stepsizes whose replicate standard error
    exceeds half the measured bias are excluded from the slope fit (there the
    measurement is Monte Carlo noise, which would flatten the slope), as are
    stepsizes where any replicate diverged.
    """
    h_values = np.asarray(sorted(float(h) for h in h_values))
    if len(h_values) < 2 or (np.diff(h_values) <= 0).any():
        raise ValueError("h_values must contain >= 2 distinct stepsizes")
    if np.ndim(steps_per_h) == 0:
        steps = [int(steps_per_h)] * len(h_values)
    else:
        steps = [int(s) for s in steps_per_h]
        if len(steps) != len(h_values):
            raise ValueError("steps_per_h must be a scalar or match h_values")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")

    results: dict[str, SweepResult] = {}
    for ki, kind in enumerate(kinds):
        bias = np.full(len(h_values), np.nan)
        mse = np.full(len(h_values), np.nan)
        stderr = np.full(len(h_values), np.nan)
        diverged: list[float] = []
        for hi, (h, total) in enumerate(zip(h_values, steps)):
            config = IntegratorConfig(h=h, D=D, kind=kind)
            burn = int(burn_in_fraction * total)
            estimates = []
            try:
                for r in range(replicates):
                    init = SamplerState(
                        np.zeros(model.dim), np.ones(model.dim), np.full(model.dim, D)
                    )
                    trace = run_chain(
                        model, init, config, None, total, burn, thinning,
                        rng=rng.derive(ki, hi, r), record_potential=False,
                    )
                    estimates.append(posterior_average(trace, test_function))
            except DivergenceError:
                diverged.append(float(h))
                continue
            err = np.asarray(estimates) - true_average
            bias[hi] = abs(err.mean())
            mse[hi] = np.mean(err**2)
            stderr[hi] = np.std(estimates, ddof=1) / np.sqrt(replicates) if replicates > 1 else 0.0

        ok = np.isfinite(bias) & (bias > 0)
        mask = ok & (stderr <= 0.5 * bias)
        if mask.sum() >= 2:
            slope, sl_err = fit_power_law(h_values[mask], bias[mask])
            mse_slope, _ = fit_power_law(h_values[mask], mse[mask])
        else:
            slope, sl_err, mse_slope = float("nan"), float("nan"), float("nan")
        results[kind] = SweepResult(
            h_values=h_values.copy(),
            bias_values=bias,
            mse_values=mse,
            stderr_values=stderr,
            fitted_slope=slope,
            slope_stderr=sl_err,
            mse_slope=mse_slope,
            fit_mask=mask,
            diverged_h=diverged,
        )
    return results
