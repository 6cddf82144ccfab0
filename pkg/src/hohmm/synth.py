"""Seeded synthetic speaker corpora with a neutral/shouted style mismatch.

Each speaker is an order-3 generator over a shared emission codebook with
small per-speaker offsets, so most of the speaker identity lives in the
state dynamics. "Shouted" test utterances are drawn from a
temperature-flattened copy of the generator and then pushed through a
per-dimension affine warp ``x * scale + offset``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .gmm import GaussianMixture
from .model import FeatureSequence, HmmModel
from .speaker_id import LabeledUtterance


@dataclass(frozen=True)
class Distortion:
    scale: tuple = (1.0,)
    offset: tuple = (0.0,)
    temperature: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scale", tuple(float(x) for x in np.atleast_1d(self.scale)))
        object.__setattr__(self, "offset", tuple(float(x) for x in np.atleast_1d(self.offset)))
        if any(s <= 0 for s in self.scale):
            raise ValueError("distortion scale must be positive")
        if self.temperature <= 0:
            raise ValueError("distortion temperature must be positive")

    @property
    def is_identity(self) -> bool:
        return all(s == 1.0 for s in self.scale) and all(o == 0.0 for o in self.offset) and self.temperature == 1.0

    def warp(self, frames: np.ndarray) -> np.ndarray:
        d = frames.shape[1]
        scale = np.broadcast_to(np.asarray(self.scale), (d,))
        offset = np.broadcast_to(np.asarray(self.offset), (d,))
        return frames * scale + offset


@dataclass(frozen=True)
class SynthSpec:
    num_speakers: int = 10
    num_states: int = 4
    dim: int = 8
    train_utterances: int = 36
    test_utterances: int = 36
    environments: tuple = ("neutral", "shouted")
    distorted_environments: tuple = ("shouted",)
    min_frames: int = 40
    max_frames: int = 60
    codebook_spread: float = 3.0
    speaker_spread: float = 0.3
    emission_variance: float = 1.0
    concentration: float = 0.3
    distortion: Distortion = field(default_factory=Distortion)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "environments", tuple(self.environments))
        object.__setattr__(self, "distorted_environments", tuple(self.distorted_environments))
        if isinstance(self.distortion, dict):
            object.__setattr__(self, "distortion", Distortion(**self.distortion))
        if self.num_speakers < 1 or self.num_states < 1 or self.dim < 1:
            raise ValueError("num_speakers, num_states and dim must be >= 1")
        if self.train_utterances < 1 or self.test_utterances < 0:
            raise ValueError("need >= 1 training utterance and >= 0 test utterances")
        if not (1 <= self.min_frames <= self.max_frames):
            raise ValueError("need 1 <= min_frames <= max_frames")
        if not self.environments:
            raise ValueError("at least one test environment is required")
        if self.emission_variance <= 0 or self.concentration <= 0:
            raise ValueError("emission_variance and concentration must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return "synth-" + hashlib.sha256(blob).hexdigest()[:16]


def speaker_id_for(index: int) -> str:
    return f"spk{index:03d}"


def _dirichlet_tensor(rng, n: int, rank: int, concentration: float) -> np.ndarray:
    return rng.dirichlet(np.full(n, concentration), size=(n,) * (rank - 1))


def make_generators(spec: SynthSpec) -> dict:
    """Generative order-3 model per speaker, keyed by speaker id."""
    rng = np.random.default_rng(spec.seed)
    n, d = spec.num_states, spec.dim
    codebook = rng.normal(0.0, spec.codebook_spread, size=(n, d))
    generators = {}
    for v in range(spec.num_speakers):
        means = codebook + rng.normal(0.0, spec.speaker_spread, size=(n, d))
        emissions = [GaussianMixture.single(means[j], spec.emission_variance) for j in range(n)]
        generators[speaker_id_for(v)] = HmmModel(
            order=3,
            initial=rng.dirichlet(np.ones(n)),
            trans1=_dirichlet_tensor(rng, n, 2, spec.concentration),
            trans2=_dirichlet_tensor(rng, n, 3, spec.concentration),
            trans3=_dirichlet_tensor(rng, n, 4, spec.concentration),
            emissions=emissions,
        )
    return generators


def tempered(model: HmmModel, temperature: float) -> HmmModel:
    """Raise every transition row to ``1 / temperature`` and renormalize."""
    if temperature == 1.0:
        return model

    def soften(p):
        with np.errstate(divide="ignore"):
            q = np.exp(np.log(p) / temperature)
        return q / q.sum(axis=-1, keepdims=True)

    tensors = [soften(t) for t in model.transitions]
    return model.replace(
        trans1=tensors[0],
        trans2=tensors[1] if model.order >= 2 else None,
        trans3=tensors[2] if model.order >= 3 else None,
    )


def sample_states(model: HmmModel, T: int, rng: np.random.Generator) -> np.ndarray:
    n = model.num_states
    q = np.empty(T, dtype=np.int64)
    q[0] = rng.choice(n, p=model.initial)
    tensors = model.transitions
    for t in range(1, T):
        m = min(t, model.order)
        p = tensors[m - 1][tuple(q[t - m : t])]
        q[t] = rng.choice(n, p=p)
    return q


def sample_sequence(model: HmmModel, T: int, rng: np.random.Generator):
    """Draw ``(states, frames)`` of length ``T`` from a generative model."""
    q = sample_states(model, T, rng)
    frames = np.empty((T, model.dim))
    for j in range(model.num_states):
        idx = np.flatnonzero(q == j)
        if idx.size:
            frames[idx] = model.emissions[j].sample(idx.size, rng)
    return q, frames


@dataclass
class SynthCorpus:
    spec: SynthSpec
    train: dict  # speaker_id -> list[FeatureSequence]
    test: list  # LabeledUtterance
    generators: dict

    def test_in(self, environment: str) -> list:
        return [u for u in self.test if u.environment == environment]


def generate(spec: SynthSpec) -> SynthCorpus:
    """Build the full corpus; identical specs give identical corpora."""
    generators = make_generators(spec)
    rng = np.random.default_rng([spec.seed, 1])
    train, test = {}, []
    for sid, gen in generators.items():
        shouted = tempered(gen, spec.distortion.temperature)
        train[sid] = []
        for _ in range(spec.train_utterances):
            T = int(rng.integers(spec.min_frames, spec.max_frames + 1))
            train[sid].append(FeatureSequence(sample_sequence(gen, T, rng)[1]))
        for u in range(spec.test_utterances):
            env = spec.environments[u % len(spec.environments)]
            T = int(rng.integers(spec.min_frames, spec.max_frames + 1))
            if env in spec.distorted_environments:
                frames = spec.distortion.warp(sample_sequence(shouted, T, rng)[1])
            else:
                frames = sample_sequence(gen, T, rng)[1]
            test.append(LabeledUtterance(sid, env, FeatureSequence(frames)))
    return SynthCorpus(spec, train, test, generators)
