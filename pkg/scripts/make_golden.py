"""Regenerate the front-end regression fixtures in tests/data/.

Writes a 1-second 16 kHz synthetic utterance (two gliding harmonics plus
seeded noise) and its MFCC+delta dump under the default FeatureConfig.
Only rerun this when the front end changes on purpose.
"""

from pathlib import Path

import numpy as np

from hohmm.features import AudioBuffer, FeatureConfig, extract_features, load_wav, save_features, write_wav

OUT = Path(__file__).resolve().parent.parent / "tests" / "data"


def synthetic_utterance(seed: int = 2024, rate: int = 16000) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    t = np.arange(rate) / rate
    f0 = 140.0 + 40.0 * np.sin(2 * np.pi * 1.5 * t)
    phase = 2 * np.pi * np.cumsum(f0) / rate
    envelope = 0.5 * (1 - np.cos(2 * np.pi * t))
    signal = envelope * (np.sin(phase) + 0.5 * np.sin(3 * phase) + 0.25 * np.sin(7 * phase))
    signal += 0.02 * rng.standard_normal(rate)
    return AudioBuffer(np.round(8000 * signal).astype(np.int16), rate)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    wav = OUT / "golden_utterance.wav"
    write_wav(wav, synthetic_utterance())
    config = FeatureConfig()
    feats = extract_features(load_wav(wav), config)
    save_features(OUT / "golden_utterance.feat", feats, config.fingerprint())
    print(f"wrote {wav} and features {feats.frames.shape}")


if __name__ == "__main__":
    main()
