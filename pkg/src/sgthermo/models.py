"""The target-distribution zoo: double-well, Gaussian oracle, logistic regression, MLP."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .core import GradientModel


def double_well_potential(theta):
    """U(theta) = (theta+4)(theta+1)(theta-1)(theta-3)/14 + 0.5, vectorized."""
    return (theta + 4.0) * (theta + 1.0) * (theta - 1.0) * (theta - 3.0) / 14.0 + 0.5


def double_well_grad(theta):
    """dU/dtheta = (4 theta^3 + 3 theta^2 - 26 theta - 1)/14, in Horner form."""
    return (((4.0 * theta + 3.0) * theta - 26.0) * theta - 1.0) * (1.0 / 14.0)


class DoubleWellModel(GradientModel):
    """1-D quartic double well with gradient noise simulated at the increment level.

    The noisy update term is built directly as grad(U)*h + N(0, 2*B*h), so the
    chain should be driven with zero injected noise (D = 0); the simulated
    gradient noise is what the thermostat has to absorb.
    """

    def __init__(self, noise_scale: float = 1.0):
        if noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        self.noise_scale = noise_scale
        self.dim = 1
        self.data_size = 0

    def potential(self, theta):
        return float(double_well_potential(theta[0]))

    def full_grad(self, theta):
        return double_well_grad(theta)

    def stochastic_grad(self, theta, minibatch, rng):
        return double_well_grad(theta)

    def grad_increment(self, theta, h, minibatch, rng):
        incr = double_well_grad(theta) * h
        if self.noise_scale > 0.0:
            incr = incr + rng.normal(0.0, np.sqrt(2.0 * self.noise_scale * h), size=1)
        return incr


class GaussianModel(GradientModel):
    """Independent standard normal target per dimension; U(theta) = sum theta_i^2 / 2.

    Analytic oracle: every coordinate has mean 0 and second moment 1, which makes
    this the reference target for bias and convergence-order measurements.
    """

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.data_size = 0

    def potential(self, theta):
        return float(0.5 * np.dot(theta, theta))

    def full_grad(self, theta):
        return np.asarray(theta, dtype=np.float64)

    def stochastic_grad(self, theta, minibatch, rng):
        return np.asarray(theta, dtype=np.float64)


class LogisticRegressionModel(GradientModel):
    """Bayesian binary logistic regression with a Gaussian prior on all parameters.

    A constant-1 feature is appended internally, so theta = (w_1..w_P, c) and
    dim = P + 1. The prior N(0, prior_variance) covers the bias as well.
    Features may be a scipy.sparse matrix or a dense array.
    """

    def __init__(self, features, labels, prior_variance: float = 10.0):
        if prior_variance <= 0:
            raise ValueError("prior_variance must be positive")
        labels = np.asarray(labels, dtype=np.float64)
        if not np.isin(labels, (0.0, 1.0)).all():
            raise ValueError("labels must be 0/1")
        if sp.issparse(features):
            features = features.tocsr()
        else:
            features = np.asarray(features, dtype=np.float64)
        if features.shape[0] != len(labels):
            raise ValueError("feature rows and labels disagree")
        self.features = features
        self.labels = labels
        self.prior_variance = float(prior_variance)
        self.data_size = features.shape[0]
        self.dim = features.shape[1] + 1

    def _logits(self, theta, features):
        w, c = theta[:-1], theta[-1]
        return np.asarray(features @ w).ravel() + c

    def potential(self, theta):
        z = self._logits(theta, self.features)
        #  -log p(y|z) = y*log(1+e^-z) + (1-y)*log(1+e^z), via logaddexp for stability
        nll = np.sum(
            self.labels * np.logaddexp(0.0, -z) + (1.0 - self.labels) * np.logaddexp(0.0, z)
        )
        return float(nll + 0.5 * np.dot(theta, theta) / self.prior_variance)

    def neg_log_likelihood(self, theta, features=None, labels=None) -> float:
        """Data term only (no prior), over the given rows or the training set."""
        if features is None:
            features, labels = self.features, self.labels
        z = self._logits(theta, features)
        return float(np.sum(labels * np.logaddexp(0.0, -z) + (1.0 - labels) * np.logaddexp(0.0, z)))

    def full_grad(self, theta):
        return self.stochastic_grad(theta, np.arange(self.data_size), None)

    def stochastic_grad(self, theta, minibatch, rng):
        if minibatch is None:
            minibatch = np.arange(self.data_size)
        rows = self.features[minibatch]
        z = self._logits(theta, rows)
        resid = expit(z) - self.labels[minibatch]
        scale = self.data_size / len(minibatch)
        grad = np.empty(self.dim)
        grad[:-1] = scale * np.asarray(rows.T @ resid).ravel()
        grad[-1] = scale * resid.sum()
        return grad + theta / self.prior_variance

    def predict_proba(self, theta, features) -> np.ndarray:
        return expit(self._logits(theta, features))


def _relu(z):
    return np.maximum(z, 0.0)


def _softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class MlpModel(GradientModel):
    """Small dense feedforward classifier with a Gaussian prior on every weight.

    Parameter vector layout (frozen so traces are portable): layer 0 weights in
    row-major (out, in) order, then layer 0 biases, then layer 1 weights, and so
    on up to the output layer. Hidden layers apply the activation; the output
    layer is affine followed by softmax. ReLU uses subgradient 0 at the kink.
    """

    activations = ("relu", "sigmoid")

    def __init__(self, layer_sizes, features, labels, activation: str = "relu",
                 prior_variance: float = 1.0):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ValueError("layer_sizes needs >= 2 positive entries")
        if activation not in self.activations:
            raise ValueError(f"activation must be one of {self.activations}")
        if prior_variance <= 0:
            raise ValueError("prior_variance must be positive")
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[1] != layer_sizes[0]:
            raise ValueError("features must be 2-D with layer_sizes[0] columns")
        if labels.min() < 0 or labels.max() >= layer_sizes[-1]:
            raise ValueError("labels out of range for the output layer")
        self.layer_sizes = layer_sizes
        self.activation = activation
        self.prior_variance = float(prior_variance)
        self.features = features
        self.labels = labels
        self.data_size = features.shape[0]
        self.n_classes = layer_sizes[-1]
        self._shapes = [
            (layer_sizes[i + 1], layer_sizes[i]) for i in range(len(layer_sizes) - 1)
        ]
        self.dim = sum(o * i + o for o, i in self._shapes)

    def _unpack(self, theta):
        """Views of theta as a list of (weights, biases) per layer."""
        params = []
        k = 0
        for out, inp in self._shapes:
            w = theta[k : k + out * inp].reshape(out, inp)
            k += out * inp
            b = theta[k : k + out]
            k += out
            params.append((w, b))
        return params

    def initial_theta(self, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
        """Entrywise N(0, scale^2) start; small enough to keep early gradients tame."""
        return scale * rng.standard_normal(self.dim)

    def _forward_cached(self, theta, X):
        params = self._unpack(theta)
        acts = [X]
        pre = []
        a = X
        for li, (w, b) in enumerate(params):
            z = a @ w.T + b
            pre.append(z)
            if li < len(params) - 1:
                a = _relu(z) if self.activation == "relu" else expit(z)
            else:
                a = z
            acts.append(a)
        return params, pre, acts, _softmax(acts[-1])

    def forward(self, theta, X) -> np.ndarray:
        """Class-probability matrix, one row per input row."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self._forward_cached(theta, X)[3]

    predict_proba = forward

    def neg_log_likelihood(self, theta, features=None, labels=None) -> float:
        if features is None:
            features, labels = self.features, self.labels
        probs = self.forward(theta, features)
        picked = probs[np.arange(len(labels)), labels]
        return float(-np.sum(np.log(np.maximum(picked, 1e-300))))

    def potential(self, theta):
        return self.neg_log_likelihood(theta) + float(
            0.5 * np.dot(theta, theta) / self.prior_variance
        )

    def full_grad(self, theta):
        return self.stochastic_grad(theta, np.arange(self.data_size), None)

    def stochastic_grad(self, theta, minibatch, rng):
        if minibatch is None:
            minibatch = np.arange(self.data_size)
        X = self.features[minibatch]
        y = self.labels[minibatch]
        params, pre, acts, probs = self._forward_cached(theta, X)

        delta = probs.copy()
        delta[np.arange(len(y)), y] -= 1.0  # d(-log softmax)/d(logits)
        grad = np.empty(self.dim)
        k = self.dim
        for li in range(len(params) - 1, -1, -1):
            w, _ = params[li]
            out, inp = self._shapes[li]
            gb = delta.sum(axis=0)
            gw = delta.T @ acts[li]
            grad[k - out : k] = gb
            grad[k - out - out * inp : k - out] = gw.ravel()
            k -= out + out * inp
            if li > 0:
                da = delta @ w
                z = pre[li - 1]
                if self.activation == "relu":
                    delta = np.where(z > 0.0, da, 0.0)
                else:
                    s = acts[li]
                    delta = da * s * (1.0 - s)
        scale = self.data_size / len(minibatch)
        return scale * grad + theta / self.prior_variance
