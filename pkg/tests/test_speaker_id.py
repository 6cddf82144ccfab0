import numpy as np
import pytest
from hypothesis import given, strategies as st

from hohmm.gmm import GaussianMixture
from hohmm.model import FeatureSequence, HmmModel
from hohmm.speaker_id import (
    LabeledUtterance,
    ManifestEntry,
    SpeakerRegistry,
    UnknownSpeakerError,
    _argmax,
    evaluate,
    format_manifest,
    identify,
    read_manifest,
    score_all,
)
from hohmm.synth import sample_sequence

import oracles


def speaker(order, means, rng, var=0.3):
    n = len(means)
    tensors = [oracles.stochastic(rng, (n,) * k) for k in range(2, order + 2)]
    return HmmModel(
        order=order,
        initial=oracles.stochastic(rng, n),
        trans1=tensors[0],
        trans2=tensors[1] if order >= 2 else None,
        trans3=tensors[2] if order >= 3 else None,
        emissions=[GaussianMixture.single(m, var) for m in means],
    )


def test_single_speaker_always_wins():
    rng = np.random.default_rng(0)
    reg = SpeakerRegistry({"only": speaker(3, [[0.0], [2.0]], rng)})
    for _ in range(5):
        assert identify(reg, rng.normal(size=(8, 1)) * 10)[0] == "only"


def test_disjoint_speakers_separate_in_every_trial():
    rng = np.random.default_rng(1)
    a = speaker(3, [[0.0, 0.0], [1.0, 1.0]], rng)
    b = speaker(3, [[8.0, 8.0], [9.0, 9.0]], rng)
    reg = SpeakerRegistry({"A": a, "B": b})
    for _ in range(100):
        _, frames = sample_sequence(a, 15, rng)
        sid, scores = identify(reg, frames)
        assert sid == "A" and scores["A"] - scores["B"] > 0


def test_identical_models_tie_to_smaller_id():
    m = speaker(2, [[0.0], [1.0]], np.random.default_rng(2))
    reg = SpeakerRegistry({"zeta": m, "alpha": m, "mid": m})
    assert identify(reg, np.zeros((6, 1)))[0] == "alpha"
    assert score_all(reg, np.zeros((6, 1)))[0].speaker_id == "alpha"


def test_identify_errors():
    with pytest.raises(ValueError, match="empty"):
        identify(SpeakerRegistry(), np.zeros((3, 1)))
    reg = SpeakerRegistry({"a": speaker(1, [[0.0]], np.random.default_rng(3))})
    with pytest.raises(ValueError, match="dimension"):
        identify(reg, np.zeros((3, 2)))


def test_registry_rejects_mixed_shapes_and_duplicates():
    rng = np.random.default_rng(4)
    reg = SpeakerRegistry({"a": speaker(2, [[0.0], [1.0]], rng)})
    with pytest.raises(ValueError, match="registry uses"):
        reg.add("b", speaker(3, [[0.0], [1.0]], rng))
    with pytest.raises(ValueError, match="already"):
        reg.add("a", speaker(2, [[0.0], [1.0]], rng))
    with pytest.raises(ValueError):
        reg.add("", speaker(2, [[0.0], [1.0]], rng))


def test_score_all_matches_identify():
    rng = np.random.default_rng(5)
    reg = SpeakerRegistry({f"s{i}": speaker(3, rng.normal(size=(3, 2)), rng) for i in range(4)})
    obs = rng.normal(size=(12, 2))
    rows = score_all(reg, obs)
    sid, scores = identify(reg, obs)
    assert rows[0].speaker_id == sid
    assert {r.speaker_id: r.viterbi for r in rows} == scores
    _, fwd = identify(reg, obs, scoring="forward")
    assert {r.speaker_id: r.forward for r in rows} == fwd
    assert all(r.forward >= r.viterbi for r in rows)
    assert [r.viterbi for r in rows] == sorted((r.viterbi for r in rows), reverse=True)


def test_score_all_single_speaker():
    reg = SpeakerRegistry({"x": speaker(1, [[0.0]], np.random.default_rng(6))})
    assert len(score_all(reg, np.zeros((4, 1)))) == 1


@given(st.dictionaries(st.text("abc", min_size=1, max_size=3), st.floats(-1e4, 1e4), min_size=1), st.floats(-1e3, 1e3))
def test_winner_invariant_to_common_shift(scores, c):
    shifted = {k: v + c for k, v in scores.items()}
    winner = _argmax(scores)
    # rounding in the shift may create or break exact ties; only check clear winners
    margins = [scores[winner] - v for k, v in scores.items() if k != winner]
    if all(m > 1e-6 for m in margins):
        assert _argmax(shifted) == winner


def test_one_speaker_registry_scores_perfectly_per_environment():
    rng = np.random.default_rng(7)
    reg = SpeakerRegistry({"solo": speaker(2, [[0.0], [3.0]], rng)})
    test = [LabeledUtterance("solo", env, FeatureSequence(rng.normal(size=(5, 1)))) for env in ("neutral", "shouted") * 3]
    report = evaluate(reg, test)
    assert report.accuracy("neutral") == report.accuracy("shouted") == 1.0


def test_evaluate_partitions_1440_utterances_per_environment():
    rng = np.random.default_rng(8)
    reg = SpeakerRegistry({"a": speaker(1, [[0.0]], rng), "b": speaker(1, [[5.0]], rng)})
    test = []
    for env in ("neutral", "shouted"):
        for i in range(1440):
            sid = "ab"[i % 2]
            center = 0.0 if sid == "a" else 5.0
            test.append(LabeledUtterance(sid, env, FeatureSequence(center + 0.1 * rng.normal(size=(3, 1)))))
    report = evaluate(reg, test)
    assert report.environments == ["neutral", "shouted"]
    assert report.counts("neutral") == (1440, 1440) and report.counts("shouted") == (1440, 1440)
    assert sum(report.confusion().values()) == 2880
    lines = report.table().splitlines()
    assert len(lines) == 1 + 2 + 1 and lines[-1].startswith("average")


def test_evaluate_rejects_unknown_speaker():
    reg = SpeakerRegistry({"a": speaker(1, [[0.0]], np.random.default_rng(9))})
    with pytest.raises(UnknownSpeakerError):
        evaluate(reg, [LabeledUtterance("ghost", "neutral", FeatureSequence(np.zeros((2, 1))))])
    with pytest.raises(ValueError):
        evaluate(reg, [])


def test_manifest_round_trip(tmp_path):
    entries = [ManifestEntry("s1", "neutral", "train", str(tmp_path / "a" / "x.wav")),
               ManifestEntry("s2", "shouted", "test", str(tmp_path / "y.feat"))]
    path = tmp_path / "m.tsv"
    path.write_text("# comment\n\n" + format_manifest(entries, relative_to=tmp_path))
    assert "a/x.wav" in path.read_text()
    assert read_manifest(path) == entries


def test_manifest_errors(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("s1\tneutral\tdev\tx.wav\n")
    with pytest.raises(ValueError, match="split"):
        read_manifest(bad)
    bad.write_text("s1\tneutral\tx.wav\n")
    with pytest.raises(ValueError, match="4 tab"):
        read_manifest(bad)
