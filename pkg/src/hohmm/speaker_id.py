"""Speaker enrollment, maximum-likelihood identification and batch evaluation."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .inference import forward_from_log_b, viterbi_from_log_b
from .model import FeatureSequence, HmmModel, as_frames

SCORINGS = ("viterbi", "forward")
SPLITS = ("train", "test")


class UnknownSpeakerError(KeyError):
    pass


@dataclass
class SpeakerRegistry:
    """Per-speaker models that share one configuration."""

    entries: dict = field(default_factory=dict)
    feature_fingerprint: str = ""
    train_fingerprint: str = ""

    def __post_init__(self):
        for sid, model in self.entries.items():
            self._check(sid, model)

    def _check(self, speaker_id: str, model: HmmModel) -> None:
        if not isinstance(speaker_id, str) or not speaker_id:
            raise ValueError("speaker ids must be non-empty strings")
        for other in self.entries.values():
            if other is model:
                continue
            shape = (other.order, other.num_states, other.num_mixtures, other.dim)
            mine = (model.order, model.num_states, model.num_mixtures, model.dim)
            if shape != mine:
                raise ValueError(
                    f"model for {speaker_id!r} has (order, N, M, D) = {mine}, registry uses {shape}"
                )
            break

    def add(self, speaker_id: str, model: HmmModel) -> None:
        if speaker_id in self.entries:
            raise ValueError(f"speaker {speaker_id!r} already enrolled")
        self._check(speaker_id, model)
        self.entries[speaker_id] = model

    @property
    def speaker_ids(self) -> list:
        return sorted(self.entries)

    @property
    def dim(self) -> Optional[int]:
        return next(iter(self.entries.values())).dim if self.entries else None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, speaker_id) -> bool:
        return speaker_id in self.entries


@dataclass(frozen=True)
class ScoreRow:
    speaker_id: str
    viterbi: float
    forward: float


def _frames_for(registry: SpeakerRegistry, obs) -> np.ndarray:
    if len(registry) == 0:
        raise ValueError("registry is empty")
    frames = as_frames(obs)
    if frames.shape[1] != registry.dim:
        raise ValueError(f"observation dimension {frames.shape[1]} != model dimension {registry.dim}")
    return frames


def _model_score(model: HmmModel, frames: np.ndarray, scoring: str) -> float:
    log_b = model.emission_log_likelihoods(frames)
    if scoring == "viterbi":
        return viterbi_from_log_b(model, log_b)[1]
    if scoring == "forward":
        return forward_from_log_b(model, log_b)[1]
    raise ValueError(f"scoring must be one of {SCORINGS}")


def _argmax(scores: dict) -> str:
    best_id, best = None, -np.inf
    for sid in sorted(scores):
        if best_id is None or scores[sid] > best:
            best_id, best = sid, scores[sid]
    return best_id


def identify(registry: SpeakerRegistry, obs, scoring: str = "viterbi"):
    """Return ``(speaker_id, {speaker_id: log-likelihood})``.

    The winner maximizes the per-model score; ties go to the
    lexicographically smallest id.
    """
    frames = _frames_for(registry, obs)
    scores = {sid: _model_score(m, frames, scoring) for sid, m in registry.entries.items()}
    return _argmax(scores), scores


def score_all(registry: SpeakerRegistry, obs) -> list:
    """Viterbi and forward scores per speaker, best Viterbi score first."""
    frames = _frames_for(registry, obs)
    rows = []
    for sid, model in registry.entries.items():
        log_b = model.emission_log_likelihoods(frames)
        rows.append(ScoreRow(sid, viterbi_from_log_b(model, log_b)[1], forward_from_log_b(model, log_b)[1]))
    rows.sort(key=lambda row: (-row.viterbi, row.speaker_id))
    return rows


@dataclass(frozen=True, eq=False)
class LabeledUtterance:
    speaker_id: str
    environment: str
    features: FeatureSequence
    path: str = ""


@dataclass(frozen=True)
class Decision:
    speaker_id: str
    environment: str
    predicted: str
    score: float
    path: str = ""

    @property
    def correct(self) -> bool:
        return self.predicted == self.speaker_id


@dataclass
class EvalReport:
    decisions: list = field(default_factory=list)

    @property
    def environments(self) -> list:
        seen = []
        for d in self.decisions:
            if d.environment not in seen:
                seen.append(d.environment)
        return seen

    def counts(self, environment: str):
        ds = [d for d in self.decisions if d.environment == environment]
        return sum(d.correct for d in ds), len(ds)

    def accuracy(self, environment: Optional[str] = None) -> float:
        if environment is None:
            return sum(d.correct for d in self.decisions) / len(self.decisions)
        correct, total = self.counts(environment)
        return correct / total

    @property
    def average_accuracy(self) -> float:
        """Unweighted mean of the per-environment accuracies."""
        envs = self.environments
        return float(np.mean([self.accuracy(e) for e in envs]))

    def confusion(self, environment: Optional[str] = None) -> Counter:
        return Counter(
            (d.speaker_id, d.predicted)
            for d in self.decisions
            if environment is None or d.environment == environment
        )

    def table(self) -> str:
        lines = [f"{'environment':<16}{'correct':>9}{'total':>8}{'accuracy':>10}"]
        for env in self.environments:
            correct, total = self.counts(env)
            lines.append(f"{env:<16}{correct:>9d}{total:>8d}{100 * correct / total:>9.1f}%")
        lines.append(f"{'average':<16}{'':>9}{len(self.decisions):>8d}{100 * self.average_accuracy:>9.1f}%")
        return "\n".join(lines)


def evaluate(registry: SpeakerRegistry, test: Sequence[LabeledUtterance], scoring: str = "viterbi") -> EvalReport:
    """Identify every test utterance and collect per-environment results."""
    test = list(test)
    if not test:
        raise ValueError("test set is empty")
    unknown = sorted({u.speaker_id for u in test if u.speaker_id not in registry})
    if unknown:
        raise UnknownSpeakerError(f"test labels name speakers with no model: {unknown}")
    report = EvalReport()
    for utt in test:
        predicted, scores = identify(registry, utt.features, scoring)
        report.decisions.append(Decision(utt.speaker_id, utt.environment, predicted, scores[predicted], utt.path))
    return report


# ---------------------------------------------------------------------------
# dataset manifest: speaker_id <TAB> environment <TAB> split <TAB> path


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    environment: str
    split: str
    path: str


def read_manifest(path) -> list:
    """Parse a manifest; relative paths are resolved against its directory."""
    base = Path(path).resolve().parent
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
            sid, env, split, p = parts
            if not sid or not env:
                raise ValueError(f"{path}:{lineno}: empty speaker id or environment")
            if split not in SPLITS:
                raise ValueError(f"{path}:{lineno}: split must be train or test, got {split!r}")
            entries.append(ManifestEntry(sid, env, split, str(base / p)))
    return entries


def format_manifest(entries: Iterable[ManifestEntry], relative_to=None) -> str:
    lines = []
    for e in entries:
        p = e.path
        if relative_to is not None:
            try:
                p = os.path.relpath(p, relative_to)
            except ValueError:
                pass
        lines.append("\t".join((e.speaker_id, e.environment, e.split, p)))
    return "".join(line + "\n" for line in lines)
