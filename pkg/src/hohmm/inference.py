"""Exact log-domain inference for order-1, 2 and 3 HMMs.

The joint probability of states ``q`` and observations ``O`` uses the full
boundary ramp::

    Psi[q1] b(O1) * a1[q1,q2] b(O2) * a2[q1,q2,q3] b(O3) * prod_{t>=4} a3[..] b(Ot)

truncated at the model order. Every recursion runs over histories of the
``r`` most recent states; see ``_kernels`` for the flat index layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .gmm import GaussianMixture
from .model import FeatureSequence, HmmModel, Trellis, as_frames, check_path, decode_tuple


def _ramp(model: HmmModel, log_b: np.ndarray, levels: int, log_initial=None) -> list:
    """Joint log-probabilities of the first ``m + 1`` states and frames, m < levels."""
    a = (model.log_initial if log_initial is None else log_initial) + log_b[0]
    out = [a]
    for m in range(1, levels):
        a = a[..., None] + model.log_transitions[m - 1] + log_b[m]
        out.append(a)
    return out


def _logsumexp_all(a: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(logsumexp(a))


def _empty_lattice(model: HmmModel, T: int) -> np.ndarray:
    n, r = model.num_states, model.order
    return np.full((T,) + (n,) * r, -np.inf)


def sequence_log_prob(model: HmmModel, path) -> float:
    """Log-probability of a state path under the transition ramp alone."""
    q = check_path(path, model.num_states)
    total = float(model.log_initial[q[0]])
    for t in range(1, q.size):
        m = min(t, model.order)
        total += float(model.log_transitions[m - 1][tuple(q[t - m : t + 1])])
    return total


def joint_log_prob(model: HmmModel, path, obs) -> float:
    """``log P(Q, O | model)`` with an emission factor at every frame."""
    frames = as_frames(obs)
    q = check_path(path, model.num_states)
    if q.size != frames.shape[0]:
        raise ValueError(f"path length {q.size} != observation length {frames.shape[0]}")
    log_b = model.emission_log_likelihoods(frames)
    return sequence_log_prob(model, q) + float(log_b[np.arange(q.size), q].sum())


def forward_from_log_b(model: HmmModel, log_b: np.ndarray, log_initial=None):
    """Forward lattice from precomputed emission log-likelihoods (T, N)."""
    T = log_b.shape[0]
    if T < 1:
        raise ValueError("observation sequence is empty")
    n, r = model.num_states, model.order
    ramp = _ramp(model, log_b, min(T, r), log_initial)
    lattice = _empty_lattice(model, T)
    if T < r:
        return Trellis(r, n, lattice, tuple(ramp)), _logsumexp_all(ramp[-1])
    alpha = _kernels.forward_pass(
        np.ascontiguousarray(ramp[-1].ravel()), model.log_top_table, np.ascontiguousarray(log_b[r - 1 :]), n
    )
    lattice.reshape(T, -1)[r - 1 :] = alpha
    return Trellis(r, n, lattice, tuple(ramp[:-1])), _logsumexp_all(alpha[-1])


def forward(model: HmmModel, obs, log_initial=None):
    """Forward lattice and total log-likelihood ``log P(O | model)``.

    ``log_initial`` replaces ``log Psi``; it is how a composite chain is
    seeded with mass that already accounts for earlier frames.
    """
    frames = as_frames(obs)
    return forward_from_log_b(model, model.emission_log_likelihoods(frames), log_initial)


def backward_from_log_b(model: HmmModel, log_b: np.ndarray) -> Trellis:
    T = log_b.shape[0]
    n, r = model.num_states, model.order
    if T < r:
        raise ValueError(f"backward lattice needs at least {r} frames for an order-{r} model, got {T}")
    beta = _kernels.backward_pass(model.log_top_table, np.ascontiguousarray(log_b[r - 1 :]), n)
    lattice = _empty_lattice(model, T)
    lattice.reshape(T, -1)[r - 1 :] = beta
    return Trellis(r, n, lattice)


def backward(model: HmmModel, obs) -> Trellis:
    """Backward lattice; ``beta`` at the last frame is identically log 1."""
    frames = as_frames(obs)
    return backward_from_log_b(model, model.emission_log_likelihoods(frames))


def viterbi_from_log_b(model: HmmModel, log_b: np.ndarray):
    T = log_b.shape[0]
    if T < 1:
        raise ValueError("observation sequence is empty")
    n, r = model.num_states, model.order
    ramp = _ramp(model, log_b, min(T, r))
    if T < r:
        # Whole path is inside the ramp: ramp[-1] already scores every path.
        best = int(np.argmax(ramp[-1]))
        score = float(ramp[-1].ravel()[best])
        return np.array(decode_tuple(best, n, T), dtype=np.int64), score, None

    delta, back = _kernels.viterbi_pass(
        np.ascontiguousarray(ramp[-1].ravel()), model.log_top_table, np.ascontiguousarray(log_b[r - 1 :]), n
    )
    suffix = n ** (r - 1)
    s = int(np.argmax(delta[-1]))
    score = float(delta[-1, s])
    tail = []
    for t in range(delta.shape[0] - 1, 0, -1):
        tail.append(s % n)
        s = int(back[t, s]) * suffix + s // n
    path = list(decode_tuple(s, n, r)) + tail[::-1]

    lattice = _empty_lattice(model, T)
    lattice.reshape(T, -1)[r - 1 :] = delta
    pointers = np.zeros(lattice.shape, dtype=np.int64)
    pointers.reshape(T, -1)[r - 1 :] = back
    trellis = Trellis(r, n, lattice, tuple(ramp[:-1]), pointers)
    return np.array(path, dtype=np.int64), score, trellis


def viterbi(model: HmmModel, obs):
    """Most likely state path and its joint log-probability.

    Ties go to the lowest state index (lexicographically smallest history).
    """
    frames = as_frames(obs)
    path, score, _ = viterbi_from_log_b(model, model.emission_log_likelihoods(frames))
    return path, score


def viterbi_trellis(model: HmmModel, obs) -> Trellis:
    """Viterbi lattice with backpointers (requires at least ``order`` frames)."""
    frames = as_frames(obs)
    _, _, trellis = viterbi_from_log_b(model, model.emission_log_likelihoods(frames))
    if trellis is None:
        raise ValueError(f"Viterbi lattice needs at least {model.order} frames")
    return trellis


@dataclass(frozen=True, eq=False)
class CompositeChain:
    """First-order chain over ``N**r`` history tuples of an order-r model.

    ``model.initial`` is the prior over the first ``r`` states. A composite
    forward pass starts at frame ``r`` (1-based) and must be seeded with
    :meth:`prefix_log_mass`, which folds in the emissions of frames
    ``1 .. r-1``.
    """

    model: HmmModel
    source: HmmModel

    @property
    def tuple_length(self) -> int:
        return self.source.order

    def states(self) -> list:
        n, r = self.source.num_states, self.source.order
        return [decode_tuple(s, n, r) for s in range(n**r)]

    def prefix_log_mass(self, obs) -> np.ndarray:
        frames = as_frames(obs)
        r = self.source.order
        if frames.shape[0] < r:
            raise ValueError(f"need at least {r} frames to seed the composite chain")
        log_b = self.source.emission_log_likelihoods(frames[: r - 1]) if r > 1 else np.zeros((0, 0))
        mass = self.source.log_initial
        for m in range(1, r):
            mass = (mass + log_b[m - 1])[..., None] + self.source.log_transitions[m - 1]
        return np.ascontiguousarray(mass.ravel())

    def forward_log_likelihood(self, obs) -> float:
        frames = as_frames(obs)
        r = self.source.order
        _, total = forward(self.model, frames[r - 1 :], log_initial=self.prefix_log_mass(frames))
        return total


def expand_to_first_order(model: HmmModel) -> CompositeChain:
    """Rewrite an order-2/3 model as an order-1 model over history tuples."""
    if model.order == 1:
        raise ValueError("model is already first order")
    n, r = model.num_states, model.order
    S = n**r
    suffix = n ** (r - 1)
    top = model.transitions[-1].reshape(S, n)
    trans = np.zeros((S, S))
    for s in range(S):
        trans[s, (s % suffix) * n : (s % suffix) * n + n] = top[s]

    prior = model.initial
    for m in range(1, r):
        prior = prior[..., None] * model.transitions[m - 1]
    prior = prior.ravel()
    prior = prior / prior.sum()

    emissions = tuple(model.emissions[s % n] for s in range(S))
    composite = HmmModel(order=1, initial=prior, trans1=trans, emissions=emissions)
    return CompositeChain(composite, model)


def state_posteriors(model: HmmModel, obs) -> np.ndarray:
    """``P(q_t = j | O)`` as a (T, N) matrix."""
    from .train import expected_counts

    return expected_counts(model, as_frames(obs)).occupancy
