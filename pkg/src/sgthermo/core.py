"""Shared sampler state, the target-model interface, and minibatch scheduling."""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .rng import RngStream, as_generator

MINIBATCH_MODES = ("shuffled-epochs", "with-replacement")


class DivergenceError(RuntimeError):
    """A sampler step produced a non-finite parameter, momentum, or thermostat entry.

    Carries the offending position and, once a chain runner has seen it, the
    1-based step index at which the chain blew up.
    """

    def __init__(self, message: str, theta: np.ndarray | None = None, step: int | None = None):
        super().__init__(message)
        self.theta = theta
        self.step = step


@dataclass
class SamplerState:
    """The augmented sampler variables: parameters, momenta, and per-dimension thermostats."""

    theta: np.ndarray
    momentum: np.ndarray
    thermostat: np.ndarray

    @classmethod
    def create(cls, theta, momentum, thermostat) -> "SamplerState":
        """Validating constructor; coerces to float64 and checks the invariants."""
        theta = np.asarray(theta, dtype=np.float64)
        momentum = np.asarray(momentum, dtype=np.float64)
        thermostat = np.asarray(thermostat, dtype=np.float64)
        if not (theta.ndim == momentum.ndim == thermostat.ndim == 1):
            raise ValueError("state components must be 1-D vectors")
        if not (len(theta) == len(momentum) == len(thermostat) >= 1):
            raise ValueError("state components must share a common length >= 1")
        state = cls(theta, momentum, thermostat)
        if not state.is_finite():
            raise DivergenceError("non-finite entry in initial state", theta=theta)
        return state

    @property
    def dim(self) -> int:
        return len(self.theta)

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.theta).all()
            and np.isfinite(self.momentum).all()
            and np.isfinite(self.thermostat).all()
        )

    def copy(self) -> "SamplerState":
        return SamplerState(self.theta.copy(), self.momentum.copy(), self.thermostat.copy())


class GradientModel(ABC):
    """A target distribution exposed through its unnormalized negative log-posterior.

    Implementors provide the full potential and gradient where tractable plus a
    minibatch gradient estimate. ``data_size`` is 0 for targets without data
    (simulated-noise or analytic oracles); those ignore the minibatch argument.
    """

    dim: int
    data_size: int

    def potential(self, theta: np.ndarray) -> float:
        """Full negative log-posterior U(theta), up to the normalizing constant."""
        raise NotImplementedError

    def full_grad(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def stochastic_grad(
        self, theta: np.ndarray, minibatch: np.ndarray | None, rng: np.random.Generator | None
    ) -> np.ndarray:
        """Minibatch-rescaled gradient estimate; equals full_grad on the full index set."""

    def grad_increment(
        self,
        theta: np.ndarray,
        h: float,
        minibatch: np.ndarray | None,
        rng: np.random.Generator | None,
    ) -> np.ndarray:
        """The pre-scaled gradient term consumed by one integrator step.

        Defaults to h times the stochastic gradient; targets that simulate
        gradient noise at the increment level override this.
        """
        return h * self.stochastic_grad(theta, minibatch, rng)


def stochastic_neg_log_posterior_grad(
    model: GradientModel,
    theta: np.ndarray,
    minibatch: np.ndarray | None,
    rng: "RngStream | np.random.Generator | None" = None,
) -> np.ndarray:
    """Evaluate the model's minibatch gradient with shape and finiteness checks."""
    theta = np.asarray(theta, dtype=np.float64)
    if len(theta) != model.dim:
        raise ValueError(f"theta has length {len(theta)}, model.dim is {model.dim}")
    if minibatch is not None and len(minibatch) > 0 and int(np.max(minibatch)) >= model.data_size:
        raise ValueError("minibatch index out of range")
    gen = as_generator(rng) if rng is not None else None
    grad = model.stochastic_grad(theta, minibatch, gen)
    if len(grad) != model.dim:
        raise ValueError(f"gradient has length {len(grad)}, expected {model.dim}")
    if not np.isfinite(grad).all():
        raise DivergenceError("non-finite gradient entry", theta=theta)
    return grad


@dataclass(frozen=True)
class MinibatchSchedule:
    """Deterministic stream of minibatch index sets over a dataset of ``data_size`` rows.

    In shuffled-epochs mode every epoch is a fresh permutation of 0..N-1 cut into
    consecutive batches (the last one may be short). In with-replacement mode each
    batch is drawn i.i.d. uniform.
    """

    data_size: int
    batch_size: int
    mode: str
    stream: RngStream

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(self.data_size / self.batch_size)

    def batches(self) -> Iterator[np.ndarray]:
        """Endless iterator of index arrays; restartable and reproducible."""
        gen = self.stream.generator()
        n, b = self.data_size, self.batch_size
        if self.mode == "with-replacement":
            while True:
                yield gen.integers(0, n, size=b)
        else:
            while True:
                perm = gen.permutation(n)
                for lo in range(0, n, b):
                    yield perm[lo : lo + b]


def make_minibatch_schedule(
    data_size: int, batch_size: int, mode: str, rng: RngStream
) -> MinibatchSchedule:
    if mode not in MINIBATCH_MODES:
        raise ValueError(f"unknown minibatch mode {mode!r}; expected one of {MINIBATCH_MODES}")
    if not (1 <= batch_size <= data_size):
        raise ValueError(
            f"batch_size must satisfy 1 <= batch_size <= data_size, got {batch_size} for N={data_size}"
        )
    return MinibatchSchedule(data_size, batch_size, mode, rng)
