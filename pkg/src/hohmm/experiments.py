"""Seeded experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gmm import GaussianMixture
from .inference import forward
from .model import HmmModel
from .speaker_id import SpeakerRegistry, evaluate
from .synth import SynthSpec, generate
from .train import TrainConfig, train_speaker

DEFAULT_BENCHMARK = Path(__file__).resolve().parents[2] / "configs" / "benchmark.json"


@dataclass(frozen=True)
class BenchmarkConfig:
    synth: SynthSpec = field(default_factory=SynthSpec)
    train: dict = field(default_factory=dict)  # TrainConfig fields except order
    orders: tuple = (1, 2, 3)

    @classmethod
    def load(cls, path=DEFAULT_BENCHMARK) -> "BenchmarkConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(SynthSpec.from_dict(raw.get("synth", {})), dict(raw.get("train", {})), tuple(raw.get("orders", (1, 2, 3))))


def run_benchmark(config: BenchmarkConfig) -> dict:
    """Train every order on the neutral split and evaluate on all environments.

    Returns ``{order: {environment: accuracy, "seconds": wall time}}``.
    """
    corpus = generate(config.synth)
    results = {}
    for order in config.orders:
        start = time.perf_counter()
        train_config = TrainConfig(order=order, **config.train)
        registry = SpeakerRegistry({sid: train_speaker(train_config, data) for sid, data in corpus.train.items()})
        report = evaluate(registry, corpus.test)
        results[order] = {env: report.accuracy(env) for env in report.environments}
        results[order]["seconds"] = time.perf_counter() - start
    return results


def scaling_model(num_states: int, dim: int, seed: int = 0) -> HmmModel:
    """Dense random order-3 model used for timing."""
    rng = np.random.default_rng(seed)
    n = num_states

    def rows(shape):
        p = rng.random(shape) + 0.1
        return p / p.sum(axis=-1, keepdims=True)

    emissions = [GaussianMixture.single(rng.normal(size=dim), 1.0) for _ in range(n)]
    return HmmModel(3, rows(n), rows((n, n)), emissions, trans2=rows((n, n, n)), trans3=rows((n,) * 4))


def time_forward(num_states: int, T: int = 200, dim: int = 2, repeats: int = 5, seed: int = 0) -> float:
    """Median wall time of one order-3 forward pass, after a warm-up call."""
    model = scaling_model(num_states, dim, seed)
    obs = np.random.default_rng(seed + 1).normal(size=(T, dim))
    forward(model, obs)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        forward(model, obs)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def scaling_ratio(small: int = 6, large: int = 12, T: int = 200, dim: int = 2, repeats: int = 5) -> float:
    return time_forward(large, T, dim, repeats) / time_forward(small, T, dim, repeats)
