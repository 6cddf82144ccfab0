"""Order-r hidden Markov model data types.

State indices are 0-based. A model of order ``r`` carries the full ramp of
transition tensors ``trans1 .. trans_r``: ``trans1[i, j]`` is used for the
step into time 2, ``trans2[i, j, k]`` for the step into time 3 (order >= 2)
and ``trans3[i, j, k, w]`` for every later step when ``r = 3``. The highest
tensor present is the one applied for all remaining steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .gmm import GaussianMixture

MAX_ORDER = 3
STOCHASTIC_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _check_stochastic(name: str, a: np.ndarray, n: int, rank: int) -> None:
    if a.shape != (n,) * rank:
        raise ValueError(f"{name} must have shape {(n,) * rank}, got {a.shape}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has negative or non-finite entries")
    sums = a.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > STOCHASTIC_TOL:
        raise ValueError(f"{name} rows must sum to 1 (max error {np.max(np.abs(sums - 1.0)):.3g})")


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Order-r HMM with Gaussian-mixture emissions; immutable once built."""

    order: int
    initial: np.ndarray
    trans1: np.ndarray
    emissions: tuple
    trans2: Optional[np.ndarray] = None
    trans3: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"order must be 1, 2 or 3, got {self.order}")
        initial = _frozen(self.initial)
        n = initial.size
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "emissions", tuple(self.emissions))
        _check_stochastic("initial", initial, n, 1)

        for rank, name in ((2, "trans1"), (3, "trans2"), (4, "trans3")):
            value = getattr(self, name)
            wanted = rank - 1 <= self.order
            if wanted and value is None:
                raise ValueError(f"order-{self.order} model requires {name}")
            if not wanted and value is not None:
                raise ValueError(f"{name} must be absent for an order-{self.order} model")
            if value is not None:
                value = _frozen(value)
                _check_stochastic(name, value, n, rank)
                object.__setattr__(self, name, value)

        if len(self.emissions) != n:
            raise ValueError(f"need {n} emission densities, got {len(self.emissions)}")
        if not all(isinstance(g, GaussianMixture) for g in self.emissions):
            raise TypeError("emissions must be GaussianMixture instances")
        dims = {g.dim for g in self.emissions}
        if len(dims) != 1:
            raise ValueError(f"emission dimensions disagree: {sorted(dims)}")

    @property
    def num_states(self) -> int:
        return self.initial.size

    @property
    def dim(self) -> int:
        return self.emissions[0].dim

    @property
    def num_mixtures(self) -> int:
        return max(g.num_components for g in self.emissions)

    @property
    def transitions(self) -> tuple:
        """Ramp tensors ``(trans1, ..., trans_r)``."""
        return tuple(t for t in (self.trans1, self.trans2, self.trans3) if t is not None)

    @cached_property
    def log_initial(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.initial)

    @cached_property
    def log_transitions(self) -> tuple:
        with np.errstate(divide="ignore"):
            return tuple(np.log(t) for t in self.transitions)

    @cached_property
    def log_top_table(self) -> np.ndarray:
        """Top-order log tensor flattened to (N**r, N): row = history tuple."""
        n = self.num_states
        return np.ascontiguousarray(self.log_transitions[-1].reshape(n**self.order, n))

    def emission_log_likelihoods(self, frames: np.ndarray) -> np.ndarray:
        """``log b_j(O_t)`` as a (T, N) matrix."""
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.dim:
            raise ValueError(
                f"observation dimension {frames.shape[-1]} does not match model dimension {self.dim}"
            )
        return np.stack([g.log_density(frames) for g in self.emissions], axis=1)

    def replace(self, **changes) -> "HmmModel":
        fields = dict(
            order=self.order,
            initial=self.initial,
            trans1=self.trans1,
            trans2=self.trans2,
            trans3=self.trans3,
            emissions=self.emissions,
        )
        fields.update(changes)
        return HmmModel(**fields)


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """One utterance as a (T, D) matrix of observation vectors."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64, copy=True)
        if frames.ndim == 1:
            frames = frames[:, None]
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"frames must be a non-empty (T, D) matrix, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite values")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def D(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.T


def as_frames(obs) -> np.ndarray:
    if isinstance(obs, FeatureSequence):
        return obs.frames
    return FeatureSequence(obs).frames


@dataclass(frozen=True, eq=False)
class Trellis:
    """Log-domain lattice over history tuples.

    ``log_values[t]`` is indexed by the ``r`` most recent states at time
    ``t`` (0-based), so it has shape ``(T,) + (N,) * r``. Lattice rows that
    precede the first full history (``t < r - 1``) hold ``-inf``; the
    corresponding lower-rank quantities live in ``ramp``, where
    ``ramp[m]`` has shape ``(N,) * (m + 1)``. ``backpointers`` is set for
    Viterbi lattices only and stores the oldest state of the best
    predecessor history.
    """

    order: int
    num_states: int
    log_values: np.ndarray
    ramp: tuple = ()
    backpointers: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return self.log_values.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.log_values.reshape(self.T, -1)


def decode_tuple(index: int, num_states: int, length: int) -> tuple:
    """Flat history index -> state tuple, most significant digit oldest."""
    return tuple(int(x) for x in np.unravel_index(index, (num_states,) * length))


def check_path(path: Sequence[int], num_states: int) -> np.ndarray:
    path = np.asarray(path)
    if path.ndim != 1 or path.size == 0:
        raise ValueError("state path must be a non-empty sequence")
    if not np.issubdtype(path.dtype, np.integer):
        raise TypeError("state path must contain integers")
    if path.min() < 0 or path.max() >= num_states:
        raise ValueError(f"state index out of range [0, {num_states})")
    return path.astype(np.int64)
