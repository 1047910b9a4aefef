"""Gaussian-process regression with a Matérn covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

SUPPORTED_NU = (0.5, 1.5, 2.5)
# multiples of the signal variance added to the diagonal, in order, until Cholesky succeeds
JITTER_SCHEDULE = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)


class GPError(np.linalg.LinAlgError):
    pass


def matern(r, variance: float = 1.0, length_scale: float = 1.0, nu: float = 2.5):
    """Matérn covariance at distance ``r`` (closed forms for nu = 1/2, 3/2, 5/2)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distances must be non-negative")
    s = r / length_scale
    if nu == 0.5:
        k = np.exp(-s)
    elif nu == 1.5:
        a = math.sqrt(3.0) * s
        k = (1.0 + a) * np.exp(-a)
    elif nu == 2.5:
        a = math.sqrt(5.0) * s
        k = (1.0 + a + a * a / 3.0) * np.exp(-a)
    else:
        raise ValueError(f"unsupported nu={nu}; supported values are {SUPPORTED_NU}")
    return variance * k


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


@dataclass(frozen=True, eq=False)
class GPModel:
    """Observations plus kernel hyperparameters.

    ``variance=None`` uses the empirical variance of ``y`` (1.0 when that is
    zero). ``mean`` is the constant prior mean.
    """

    X: np.ndarray
    y: np.ndarray
    length_scale: float = 0.08
    nu: float = 2.5
    noise: float = 1e-4
    variance: float | None = None
    mean: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(len(self.X), -1)
        y = np.asarray(self.y, dtype=float).ravel()
        if len(X) != len(y):
            raise ValueError("X and y lengths differ")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def signal_variance(self) -> float:
        if self.variance is not None:
            return float(self.variance)
        v = float(np.var(self.y)) if len(self.y) else 0.0
        return v if v > 0 else 1.0

    def kernel(self, a, b) -> np.ndarray:
        return matern(pairwise_distances(a, b), self.signal_variance, self.length_scale, self.nu)


def _factor(K: np.ndarray, variance: float):
    eye = np.eye(len(K))
    for jitter in JITTER_SCHEDULE:
        try:
            return cho_factor(K + jitter * variance * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
    raise GPError(f"kernel matrix not positive definite after jitter up to {JITTER_SCHEDULE[-1]:g}*variance")


def gp_posterior(model: GPModel, query) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation of the latent function at ``query``."""
    if len(model.y) == 0:
        raise ValueError("the model needs at least one observation")
    Q = np.asarray(query, dtype=float).reshape(len(query), -1)
    var = model.signal_variance
    K = model.kernel(model.X, model.X) + model.noise * np.eye(len(model.y))
    factor = _factor(K, var)
    Ks = model.kernel(model.X, Q)
    alpha = cho_solve(factor, model.y - model.mean)
    mu = model.mean + Ks.T @ alpha
    v = cho_solve(factor, Ks)
    post_var = var - np.einsum("ij,ij->j", Ks, v)
    return mu, np.sqrt(np.clip(post_var, 0.0, None))
