"""Diagonal-covariance Gaussian mixtures used as per-state emission densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))
DEFAULT_VARIANCE_FLOOR = 1e-4


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Mixture of ``M`` diagonal Gaussians in ``D`` dimensions.

    Parameters
    ----------
    weights : array, shape (M,)
    means : array, shape (M, D)
    variances : array, shape (M, D)
    variance_floor : float
        Lower bound every variance must respect.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    variance_floor: float = DEFAULT_VARIANCE_FLOOR

    def __post_init__(self):
        weights = _frozen(np.atleast_1d(self.weights))
        means = _frozen(np.atleast_2d(self.means))
        variances = _frozen(np.atleast_2d(self.variances))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if means.shape != variances.shape or means.shape[0] != weights.size:
            raise ValueError(
                f"shape mismatch: weights {weights.shape}, means {means.shape}, "
                f"variances {variances.shape}"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be positive")
        if np.any(variances < self.variance_floor):
            raise ValueError(
                f"variances below floor {self.variance_floor}: min {variances.min()}"
            )

    @property
    def num_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, frames: np.ndarray) -> np.ndarray:
        """Weighted per-component log densities, shape (T, M).

        Entry ``[t, m]`` is ``log w_m + log N(O_t; mu_m, diag(var_m))``.
        """
        frames = np.asarray(frames, dtype=np.float64)
        diff = frames[:, None, :] - self.means[None, :, :]
        mahal = np.sum(diff * diff / self.variances[None, :, :], axis=2)
        log_norm = np.sum(np.log(self.variances), axis=1) + self.dim * LOG_2PI
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        return log_w[None, :] - 0.5 * (log_norm[None, :] + mahal)

    def log_density(self, frames: np.ndarray) -> np.ndarray:
        """``log b(O_t)`` for every frame, shape (T,)."""
        return logsumexp(self.component_log_densities(frames), axis=1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.num_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[comp] + noise * np.sqrt(self.variances[comp])

    @classmethod
    def single(cls, mean, variance, variance_floor: float = DEFAULT_VARIANCE_FLOOR):
        """One-component mixture; ``variance`` may be scalar or per-dimension."""
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        var = np.broadcast_to(np.asarray(variance, dtype=np.float64), mean.shape)
        return cls(np.ones(1), mean[None, :], var[None, :], variance_floor)


def emission_log_likelihoods(emissions, frames: np.ndarray) -> np.ndarray:
    """Stack ``log b_j(O_t)`` for all states into a (T, N) matrix."""
    frames = np.asarray(frames, dtype=np.float64)
    return np.stack([g.log_density(frames) for g in emissions], axis=1)
