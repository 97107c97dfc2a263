"""One-step transition kernels and the chain runner.

Five kernels are provided. The thermostat samplers evolve (theta, p, xi)
jointly; the splitting variants compose analytically solvable sub-flows in a
palindromic A-B-O-B-A pattern, which buys a second order of one-step accuracy
at the cost of a single extra half-step of bookkeeping. All kernels consume
exactly one gradient evaluation per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DivergenceError, GradientModel, MinibatchSchedule, SamplerState
from .rng import RngStream, as_generator

KINDS = ("msgnht-euler", "msgnht-split", "sghmc-euler", "sghmc-split", "sgld")


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepsize h, injected-noise constant D, and the kernel to apply.

    D = 0 is allowed: targets that simulate gradient noise internally (the
    double well) run with no injected noise at all. ``thermostat_frozen``
    pins xi at its current value, which turns the thermostat kernels into
    constant-friction ones (used for reductions and tests).
    """

    h: float
    D: float = 0.0
    kind: str = "msgnht-split"
    thermostat_frozen: bool = False

    def __post_init__(self):
        if not (self.h > 0.0 and math.isfinite(self.h)):
            raise ValueError("stepsize h must be positive and finite")
        if self.D < 0.0:
            raise ValueError("diffusion constant D must be nonnegative")
        if self.kind not in KINDS:
            raise ValueError(f"unknown integrator kind {self.kind!r}; expected one of {KINDS}")


def _finish(theta, p, xi) -> SamplerState:
    if not (np.isfinite(p).all() and np.isfinite(theta).all() and np.isfinite(xi).all()):
        raise DivergenceError("step produced a non-finite state", theta=theta)
    return SamplerState(theta, p, xi)


def msgnht_euler_step(state, model, minibatch, config, rng) -> SamplerState:
    """Euler update of the thermostat sampler.

    theta' = theta + p h
    p'     = p - grad(theta') h - xi . p h + sqrt(2D) zeta,  zeta ~ N(0, h I)
    xi'    = xi + (p' . p' - 1) h

    The gradient is evaluated at the already-moved theta' and the thermostat
    update sees the new momentum.
    """
    h, d = config.h, config.D
    p0, xi0 = state.momentum, state.thermostat
    theta = state.theta + p0 * h
    p = p0 - model.grad_increment(theta, h, minibatch, rng) - xi0 * p0 * h
    if d > 0.0:
        p = p + math.sqrt(2.0 * d * h) * rng.standard_normal(len(p))
    xi = xi0 if config.thermostat_frozen else xi0 + (p * p - 1.0) * h
    return _finish(theta, p, xi)


def msgnht_split_step(state, model, minibatch, config, rng) -> SamplerState:
    """Symmetric-splitting update of the thermostat sampler (phases A-B-O-B-A).

    A: theta += p h/2;  xi += (p . p - 1) h/2
    B: p *= exp(-xi h/2)
    O: p -= grad(theta) h;  p += sqrt(2D) zeta,  zeta ~ N(0, h I)
    B: p *= exp(-xi h/2)
    A: theta += p h/2;  xi += (p . p - 1) h/2

    Both B phases reuse the xi produced by the first A phase; the gradient is
    evaluated at the half-updated theta.
    """
    h, d = config.h, config.D
    half = 0.5 * h
    frozen = config.thermostat_frozen
    p = state.momentum
    theta = state.theta + p * half
    xi = state.thermostat if frozen else state.thermostat + (p * p - 1.0) * half
    decay = np.exp(-xi * half)
    p = decay * p
    p = p - model.grad_increment(theta, h, minibatch, rng)
    if d > 0.0:
        p = p + math.sqrt(2.0 * d * h) * rng.standard_normal(len(p))
    p = decay * p
    theta = theta + p * half
    if not frozen:
        xi = xi + (p * p - 1.0) * half
    return _finish(theta, p, xi)


def sghmc_euler_step(state, model, minibatch, config, rng) -> SamplerState:
    """Euler update with constant friction D in place of the thermostat; xi is untouched."""
    h, d = config.h, config.D
    p0 = state.momentum
    theta = state.theta + p0 * h
    p = p0 - model.grad_increment(theta, h, minibatch, rng) - d * p0 * h
    if d > 0.0:
        p = p + math.sqrt(2.0 * d * h) * rng.standard_normal(len(p))
    return _finish(theta, p, state.thermostat)


def sghmc_split_step(state, model, minibatch, config, rng) -> SamplerState:
    """A-B-O-B-A update with the friction pinned at D; xi is untouched."""
    h, d = config.h, config.D
    half = 0.5 * h
    decay = math.exp(-d * half)
    p = state.momentum
    theta = state.theta + p * half
    p = decay * p
    p = p - model.grad_increment(theta, h, minibatch, rng)
    if d > 0.0:
        p = p + math.sqrt(2.0 * d * h) * rng.standard_normal(len(p))
    p = decay * p
    theta = theta + p * half
    return _finish(theta, p, state.thermostat)


def sgld_step(state, model, minibatch, config, rng) -> SamplerState:
    """First-order Langevin update theta' = theta - grad(theta) h + sqrt(2h) eta; p, xi untouched."""
    h = config.h
    theta = state.theta - model.grad_increment(state.theta, h, minibatch, rng)
    theta = theta + math.sqrt(2.0 * h) * rng.standard_normal(len(theta))
    return _finish(theta, state.momentum, state.thermostat)


STEP_KERNELS = {
    "msgnht-euler": msgnht_euler_step,
    "msgnht-split": msgnht_split_step,
    "sghmc-euler": sghmc_euler_step,
    "sghmc-split": sghmc_split_step,
    "sgld": sgld_step,
}


@dataclass
class Trace:
    """Time-ordered record of the states a chain visited after burn-in and thinning.

    Component arrays have one row per recorded state. ``u_values`` holds the
    full potential where it was recorded (NaN otherwise) and ``xi_means`` the
    mean thermostat entry per state.
    """

    thetas: np.ndarray
    momenta: np.ndarray
    thermostats: np.ndarray
    u_values: np.ndarray
    xi_means: np.ndarray
    burn_in: int
    thinning: int
    total_steps: int
    final_state: SamplerState = field(repr=False, default=None)

    def __len__(self) -> int:
        return self.thetas.shape[0]

    def state_at(self, i: int) -> SamplerState:
        return SamplerState(self.thetas[i], self.momenta[i], self.thermostats[i])


def run_chain(
    model: GradientModel,
    init_state: SamplerState,
    config: IntegratorConfig,
    schedule: MinibatchSchedule | None,
    total_steps: int,
    burn_in: int = 0,
    thinning: int = 1,
    rng: "RngStream | np.random.Generator" = RngStream(0),
    record_potential: bool = True,
) -> Trace:
    """Apply the configured kernel ``total_steps`` times and record the thinned tail.

    Records the state after steps burn_in + thinning, burn_in + 2 thinning, ...
    for floor((total_steps - burn_in)/thinning) records in all. A divergence is
    re-raised with the 1-based step index attached.
    """
    if burn_in < 0 or total_steps < burn_in:
        raise ValueError("need total_steps >= burn_in >= 0")
    if thinning < 1:
        raise ValueError("thinning must be >= 1")
    if len(init_state.theta) != model.dim:
        raise ValueError("init_state dimension does not match the model")

    gen = as_generator(rng)
    step = STEP_KERNELS[config.kind]
    # A MinibatchSchedule restarts from its own stream; an iterator resumes
    # where a previous chunk left off (epoch-wise training drives this).
    if schedule is None:
        batches = None
    elif isinstance(schedule, MinibatchSchedule):
        batches = schedule.batches()
    else:
        batches = iter(schedule)

    n_rec = (total_steps - burn_in) // thinning
    n = model.dim
    thetas = np.empty((n_rec, n))
    momenta = np.empty((n_rec, n))
    thermostats = np.empty((n_rec, n))
    u_values = np.full(n_rec, np.nan)

    can_record_u = record_potential
    state = init_state
    rec = 0
    # overflow to inf/nan is the divergence detector itself; don't warn per step
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for t in range(1, total_steps + 1):
            minibatch = next(batches) if batches is not None else None
            try:
                state = step(state, model, minibatch, config, gen)
            except DivergenceError as err:
                err.step = t
                raise
            if t > burn_in and (t - burn_in) % thinning == 0:
                thetas[rec] = state.theta
                momenta[rec] = state.momentum
                thermostats[rec] = state.thermostat
                if can_record_u:
                    try:
                        u_values[rec] = model.potential(state.theta)
                    except NotImplementedError:
                        can_record_u = False
                rec += 1

    xi_means = thermostats.mean(axis=1) if n_rec else np.empty(0)
    return Trace(
        thetas=thetas,
        momenta=momenta,
        thermostats=thermostats,
        u_values=u_values,
        xi_means=xi_means,
        burn_in=burn_in,
        thinning=thinning,
        total_steps=total_steps,
        final_state=state,
    )
