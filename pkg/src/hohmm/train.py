"""Baum-Welch training for order-r HMMs with GMM emissions.

The E-step runs forward-backward over history tuples, which is the
first-order composite chain with its sparse successor structure spelled
out. Expected counts of ``(history, next state)`` pairs re-estimate the
top-order tensor; the posterior over the first ``r`` states re-estimates
the ramp (``Psi``, ``trans1``, ``trans2``).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp, softmax

from . import _kernels
from .gmm import DEFAULT_VARIANCE_FLOOR, GaussianMixture
from .inference import _ramp, backward_from_log_b, forward_from_log_b
from .model import HmmModel, as_frames

logger = logging.getLogger(__name__)

TOPOLOGIES = ("ergodic", "left_to_right")
_ZERO_OCCUPANCY = 1e-10
MONOTONE_SLACK = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    order: int = 3
    num_states: int = 6
    num_mixtures: int = 5
    max_iterations: int = 20
    log_likelihood_tol: float = 1e-4
    transition_floor: float = 1e-6
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    seed: int = 0
    topology: str = "ergodic"

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"order must be 1, 2 or 3, got {self.order}")
        if self.num_states < 1 or self.num_mixtures < 1:
            raise ValueError("num_states and num_mixtures must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.transition_floor <= 0 or self.variance_floor <= 0:
            raise ValueError("floors must be positive")
        if self.transition_floor * self.num_states >= 1:
            raise ValueError("transition_floor * num_states must be < 1")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")


@dataclass
class TrainReport:
    iterations_run: int = 0
    log_likelihoods: list = field(default_factory=list)
    converged: bool = False
    frozen_states: list = field(default_factory=list)

    @property
    def max_decrease(self) -> float:
        ll = np.asarray(self.log_likelihoods)
        if ll.size < 2:
            return 0.0
        return float(max(0.0, -np.min(np.diff(ll))))

    def to_dict(self) -> dict:
        return {
            "iterations_run": self.iterations_run,
            "log_likelihoods": [float(x) for x in self.log_likelihoods],
            "converged": self.converged,
            "frozen_states": self.frozen_states,
        }


# ---------------------------------------------------------------------------
# initialization


def initial_transitions(num_states: int, order: int, topology: str = "ergodic") -> list:
    """Uniform-over-allowed-successors ramp tensors ``[Psi, trans1, ...]``."""
    n = num_states
    if topology == "ergodic":
        initial = np.full(n, 1.0 / n)
        step = np.full((n, n), 1.0 / n)
    else:
        initial = np.zeros(n)
        initial[0] = 1.0
        step = np.zeros((n, n))
        for k in range(n):
            if k + 1 < n:
                step[k, k] = step[k, k + 1] = 0.5
            else:
                step[k, k] = 1.0
    # Successor distribution depends only on the most recent state.
    tensors = [initial]
    for rank in range(2, order + 2):
        tensors.append(np.broadcast_to(step, (n,) * (rank - 2) + (n, n)).copy())
    return tensors


def _stack_frames(data) -> np.ndarray:
    if len(data) == 0:
        raise ValueError("training data is empty")
    frames = [as_frames(x) for x in data]
    dims = {f.shape[1] for f in frames}
    if len(dims) != 1:
        raise ValueError(f"feature dimensions disagree across sequences: {sorted(dims)}")
    return np.vstack(frames)


def init_model(config: TrainConfig, data: Sequence) -> HmmModel:
    """Uniform transitions plus k-means emissions (``N * M`` clusters).

    Clusters are sorted by centroid norm and dealt to states in blocks of
    ``M``, so state 0 gets the ``M`` lowest-norm centroids.
    """
    frames = _stack_frames(data)
    n, m = config.num_states, config.num_mixtures
    k = n * m
    rng = np.random.default_rng(config.seed)
    points = frames
    if points.shape[0] < k:
        points = np.tile(points, (int(np.ceil(k / points.shape[0])), 1))
    global_var = np.maximum(frames.var(axis=0), config.variance_floor)

    distinct = np.unique(points, axis=0)
    if k == 1:
        centroids, labels = points.mean(axis=0, keepdims=True), np.zeros(len(points), dtype=int)
    elif distinct.shape[0] < k:
        # Not enough distinct frames for k clusters; surplus clusters stay empty.
        centroids = distinct[np.arange(k) % distinct.shape[0]]
        labels = np.argmin(((points[:, None, :] - centroids[None]) ** 2).sum(axis=2), axis=1)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            centroids, labels = kmeans2(points, k, minit="++", seed=rng, missing="warn")

    counts = np.bincount(labels, minlength=k).astype(float)
    variances = np.empty_like(centroids)
    for c in range(k):
        members = points[labels == c]
        if members.shape[0] >= 2:
            variances[c] = members.var(axis=0)
        else:
            variances[c] = global_var
    variances = np.maximum(variances, config.variance_floor)

    order_idx = np.argsort(np.linalg.norm(centroids, axis=1), kind="stable")
    emissions = []
    for j in range(n):
        idx = order_idx[j * m : (j + 1) * m]
        w = counts[idx] + 1.0
        emissions.append(GaussianMixture(w / w.sum(), centroids[idx], variances[idx], config.variance_floor))

    tensors = initial_transitions(n, config.order, config.topology)
    return HmmModel(
        order=config.order,
        initial=tensors[0],
        trans1=tensors[1],
        trans2=tensors[2] if config.order >= 2 else None,
        trans3=tensors[3] if config.order >= 3 else None,
        emissions=emissions,
    )


# ---------------------------------------------------------------------------
# E-step


@dataclass
class SufficientStats:
    """Mergeable expected counts for one or more sequences."""

    ramp: list  # ramp[0]: Psi counts (N,), ramp[m]: trans_m counts
    top: np.ndarray  # (N**r, N) counts for the top-order tensor
    mix_occupancy: list  # per state (M,)
    mix_sum: list  # per state (M, D)
    mix_sumsq: list  # per state (M, D)
    log_likelihood: float = 0.0
    num_frames: int = 0
    occupancy: Optional[np.ndarray] = None  # (T, N), single-sequence only

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        return SufficientStats(
            ramp=[a + b for a, b in zip(self.ramp, other.ramp)],
            top=self.top + other.top,
            mix_occupancy=[a + b for a, b in zip(self.mix_occupancy, other.mix_occupancy)],
            mix_sum=[a + b for a, b in zip(self.mix_sum, other.mix_sum)],
            mix_sumsq=[a + b for a, b in zip(self.mix_sumsq, other.mix_sumsq)],
            log_likelihood=self.log_likelihood + other.log_likelihood,
            num_frames=self.num_frames + other.num_frames,
        )


def _marginal(p: np.ndarray, keep: int) -> np.ndarray:
    """Sum ``p`` over all axes except the first ``keep``."""
    axes = tuple(range(keep, p.ndim))
    return p.sum(axis=axes) if axes else p


def expected_counts(model: HmmModel, obs) -> SufficientStats:
    """Posterior expected counts for one observation sequence."""
    frames = as_frames(obs)
    T = frames.shape[0]
    n, r = model.num_states, model.order
    log_b = model.emission_log_likelihoods(frames)
    top = np.zeros((n**r, n))

    if T >= r:
        alpha_t, total = forward_from_log_b(model, log_b)
        beta_t = backward_from_log_b(model, log_b)
        alpha = alpha_t.flat[r - 1 :]
        beta = beta_t.flat[r - 1 :]
        if not np.isfinite(total):
            raise FloatingPointError("sequence has zero likelihood under the model")
        hist_post = np.exp(alpha + beta - total)
        first = hist_post[0].reshape((n,) * r)
        top = _kernels.transition_posteriors(
            alpha, beta, model.log_top_table, np.ascontiguousarray(log_b[r - 1 :]), total, n
        )
        late = hist_post.reshape(-1, n ** (r - 1), n).sum(axis=1)
        early = [
            _marginal(np.moveaxis(first, t, 0), 1) for t in range(r - 1)
        ]
        occupancy = np.vstack(early + [late]) if early else late
    else:
        # Too short for a full history: the ramp enumerates every path.
        joint = _ramp(model, log_b, T)[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            total = float(logsumexp(joint))
        if not np.isfinite(total):
            raise FloatingPointError("sequence has zero likelihood under the model")
        first = np.exp(joint - total)
        occupancy = np.vstack([_marginal(np.moveaxis(first, t, 0), 1) for t in range(T)])

    ramp = [_marginal(first, 1)]
    for m in range(1, r):
        if first.ndim >= m + 1:
            ramp.append(_marginal(first, m + 1))
        else:
            ramp.append(np.zeros((n,) * (m + 1)))

    mix_occ, mix_sum, mix_sq = [], [], []
    for j, g in enumerate(model.emissions):
        comp = g.component_log_densities(frames)
        with np.errstate(invalid="ignore"):
            resp = softmax(comp, axis=1)
        resp = np.nan_to_num(resp) * occupancy[:, j : j + 1]
        mix_occ.append(resp.sum(axis=0))
        mix_sum.append(resp.T @ frames)
        mix_sq.append(resp.T @ (frames * frames))

    return SufficientStats(ramp, top, mix_occ, mix_sum, mix_sq, total, T, occupancy)


def accumulate(model: HmmModel, data: Sequence) -> SufficientStats:
    stats = None
    for obs in data:
        s = expected_counts(model, obs)
        s.occupancy = None
        stats = s if stats is None else stats + s
    return stats


# ---------------------------------------------------------------------------
# M-step


def floored_normalize(counts: np.ndarray, floor: float, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Maximum-likelihood distributions along the last axis with ``p >= floor``.

    Entries outside ``mask`` are structural zeros and stay at zero. The
    result maximizes ``sum c log p`` under the floor constraint, so EM with
    floors still never decreases the likelihood.
    """
    counts = np.asarray(counts, dtype=np.float64)
    mask = np.ones(counts.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    c = np.where(mask, counts, 0.0)
    fixed = np.zeros(c.shape, dtype=bool)
    for _ in range(c.shape[-1] + 1):
        free = mask & ~fixed
        budget = 1.0 - floor * fixed.sum(axis=-1, keepdims=True)
        csum = np.where(free, c, 0.0).sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(free, c * budget / csum, 0.0)
        p = np.nan_to_num(p)
        grow = free & (p < floor)
        if not grow.any():
            break
        fixed |= grow
    return np.where(fixed, floor, p)


def _reestimate(previous: np.ndarray, counts: np.ndarray, floor: float, mask: np.ndarray) -> np.ndarray:
    """Floored normalisation, keeping rows that received no expected counts."""
    totals = np.where(mask, counts, 0.0).sum(axis=-1, keepdims=True)
    updated = floored_normalize(counts, floor, mask)
    out = np.where(totals > _ZERO_OCCUPANCY, updated, previous)
    return out / out.sum(axis=-1, keepdims=True)


def _update_emissions(model: HmmModel, stats: SufficientStats, variance_floor: float, report=None):
    emissions = []
    for j, g in enumerate(model.emissions):
        occ = stats.mix_occupancy[j]
        if occ.sum() <= _ZERO_OCCUPANCY:
            logger.info("state %d received no occupancy; parameters frozen", j)
            if report is not None:
                report.frozen_states.append(j)
            emissions.append(g)
            continue
        live = occ > _ZERO_OCCUPANCY
        safe = np.where(live, occ, 1.0)[:, None]
        means = np.where(live[:, None], stats.mix_sum[j] / safe, g.means)
        var = stats.mix_sumsq[j] / safe - means * means
        var = np.where(live[:, None], np.maximum(var, variance_floor), g.variances)
        var = np.maximum(var, variance_floor)
        emissions.append(GaussianMixture(occ / occ.sum(), means, var, variance_floor))
    return emissions


def m_step(model: HmmModel, stats: SufficientStats, config: TrainConfig,
           support: Optional[list] = None, report: Optional[TrainReport] = None) -> HmmModel:
    """Re-estimate every parameter from accumulated expected counts.

    ``support`` lists boolean masks for ``[Psi, trans1, ...]``; entries
    outside it are structural zeros (left-to-right topology).
    """
    r, n = model.order, model.num_states
    current = [model.initial, *model.transitions]
    if support is None:
        support = [t > 0 for t in current]
    counts = list(stats.ramp) + [stats.top.reshape((n,) * (r + 1))]
    new = [
        _reestimate(prev, cnt.reshape(prev.shape), config.transition_floor, mask)
        for prev, cnt, mask in zip(current, counts, support)
    ]
    return HmmModel(
        order=r,
        initial=new[0],
        trans1=new[1],
        trans2=new[2] if r >= 2 else None,
        trans3=new[3] if r >= 3 else None,
        emissions=_update_emissions(model, stats, config.variance_floor, report),
    )


def baum_welch(init: HmmModel, data: Sequence, config: TrainConfig):
    """EM re-estimation; returns ``(model, TrainReport)``.

    ``report.log_likelihoods[k]`` is the total training log-likelihood of
    the model after ``k`` M-steps.
    """
    frames = [as_frames(x) for x in data]
    if not frames:
        raise ValueError("training data is empty")
    if any(f.shape[1] != init.dim for f in frames):
        raise ValueError("training data dimension does not match the model")
    support = [t > 0 for t in (init.initial, *init.transitions)]
    report = TrainReport()
    model = init
    stats = accumulate(model, frames)
    report.log_likelihoods.append(stats.log_likelihood)
    num_frames = stats.num_frames

    for _ in range(config.max_iterations):
        candidate = m_step(model, stats, config, support, report)
        new_stats = accumulate(candidate, frames)
        report.iterations_run += 1
        report.log_likelihoods.append(new_stats.log_likelihood)
        old = report.log_likelihoods[-2] / num_frames
        cur = new_stats.log_likelihood / num_frames
        model, stats = candidate, new_stats
        if (cur - old) / max(abs(old), 1e-12) < config.log_likelihood_tol:
            report.converged = True
            break

    drop = report.max_decrease
    if drop > MONOTONE_SLACK:
        logger.warning("training log-likelihood decreased by up to %.3g", drop)
    return model, report


def train_speaker(config: TrainConfig, data: Sequence, return_report: bool = False):
    """Initialize and train one speaker model from that speaker's utterances."""
    model, report = baum_welch(init_model(config, data), data, config)
    return (model, report) if return_report else model
