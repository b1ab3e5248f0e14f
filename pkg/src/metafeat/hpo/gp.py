"""Zero-mean Gaussian process with a Matern-3/2 kernel and expected improvement."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.stats import norm

SQRT3 = math.sqrt(3.0)
LENGTHSCALES = tuple(10.0 ** e for e in (-1.0, -0.5, 0.0, 0.5, 1.0))
VARIANCES = (0.25, 1.0, 4.0)
JITTER = 1e-8
MAX_JITTER = 1e-2


def matern32(d, variance: float = 1.0, lengthscale: float = 1.0):
    r = SQRT3 * np.asarray(d, dtype=np.float64) / lengthscale
    return variance * (1.0 + r) * np.exp(-r)


def distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.sqrt(np.maximum(sq, 0.0))


class GaussianProcess:
    def __init__(self, variance: float = 1.0, lengthscale: float = 1.0, jitter: float = JITTER):
        self.variance = variance
        self.lengthscale = lengthscale
        self.jitter = jitter

    def kernel(self, A, B):
        return matern32(distances(A, B), self.variance, self.lengthscale)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        K = self.kernel(self.X, self.X)
        jitter = self.jitter
        while True:
            try:
                self.L = cholesky(K + jitter * np.eye(len(K)), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > MAX_JITTER:
                    raise
        self.jitter_used = jitter
        self.alpha = cho_solve((self.L, True), self.y)
        return self

    def predict(self, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Ks = self.kernel(np.asarray(Xs, dtype=np.float64), self.X)
        mean = Ks @ self.alpha
        v = cho_solve((self.L, True), Ks.T)
        var = self.variance - np.einsum("ij,ji->i", Ks, v)
        return mean, np.maximum(var, 0.0)

    def log_marginal_likelihood(self) -> float:
        n = len(self.y)
        return float(-0.5 * self.y @ self.alpha - np.log(np.diag(self.L)).sum()
                     - 0.5 * n * math.log(2.0 * math.pi))


def fit_gp(X, y, lengthscales=LENGTHSCALES, variances=VARIANCES,
           jitter: float = JITTER) -> GaussianProcess:
    """Best (variance, lengthscale) pair on the grid by log marginal likelihood."""
    best, best_lml = None, -np.inf
    for ell in lengthscales:
        for var in variances:
            gp = GaussianProcess(var, ell, jitter).fit(X, y)
            lml = gp.log_marginal_likelihood()
            if lml > best_lml:
                best, best_lml = gp, lml
    return best


def expected_improvement(mean, var, best: float) -> np.ndarray:
    """EI for minimization below the incumbent ``best``."""
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.sqrt(np.maximum(var, 0.0))
    gain = best - mean
    ei = np.maximum(gain, 0.0)
    pos = sd > 0
    # cdf/pdf are saturated well before |z| = 40; clipping avoids overflow
    z = np.clip(gain[pos] / sd[pos], -40.0, 40.0)
    ei[pos] = gain[pos] * norm.cdf(z) + sd[pos] * norm.pdf(z)
    return np.maximum(ei, 0.0)
