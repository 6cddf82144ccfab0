"""Command-line pipeline: extract, train, evaluate, identify, synth, ttest.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

from .features import (
    FeatureConfig,
    WavError,
    atomic_write_text,
    extract_features,
    load_features,
    load_wav,
    save_features,
)
from .modelfile import ModelFormatError, load_model, save_model
from .speaker_id import (
    SCORINGS,
    LabeledUtterance,
    ManifestEntry,
    SpeakerRegistry,
    UnknownSpeakerError,
    evaluate,
    format_manifest,
    identify,
    read_manifest,
    score_all,
)
from .stats import CRITICAL_T_005, t_test
from .synth import SynthSpec, generate
from .train import TrainConfig, train_speaker

logger = logging.getLogger("hohmm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST_NAME = "manifest.tsv"

REPORT_CSV_HELP = """\
evaluate writes three files next to --report:
  <report>                 per-environment accuracy table plus an average row
  <report>.csv             one row per test utterance:
                           speaker_id,environment,predicted,correct,score,path
  <report>.confusion.csv   environment,speaker_id,predicted,count
"""


class DataError(Exception):
    """Bad or inconsistent input data (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_dataclass_flags(parser, cls, skip=()):
    group = parser.add_argument_group(cls.__name__)
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        default = f.default
        if isinstance(default, bool):
            group.add_argument(_flag(f.name), dest=f.name, action="store_true", default=default)
        else:
            group.add_argument(_flag(f.name), dest=f.name, type=type(default), default=default,
                               metavar=type(default).__name__.upper(), help=f"default: {default}")


def _from_args(cls, args):
    names = {f.name for f in dataclasses.fields(cls)}
    return cls(**{k: v for k, v in vars(args).items() if k in names})


def _fingerprint(obj) -> str:
    blob = json.dumps(dataclasses.asdict(obj), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_utterance(path, feature_config: FeatureConfig):
    """``(FeatureSequence, fingerprint)`` from a WAV file or a feature dump."""
    path = Path(path)
    if path.suffix.lower() == ".wav":
        return extract_features(load_wav(path), feature_config), feature_config.fingerprint()
    return load_features(path)


def _read_manifest(path):
    try:
        return read_manifest(path)
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _load_or_fail(entry: ManifestEntry, feature_config):
    try:
        return load_utterance(entry.path, feature_config)
    except (OSError, ValueError) as exc:
        raise DataError(f"{entry.path}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_extract(args) -> int:
    config = _from_args(FeatureConfig, args)
    entries = _read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not entries:
        logger.warning("manifest %s is empty; nothing to extract", args.manifest)
    done, failures = [], []
    for idx, entry in enumerate(entries):
        target = out_dir / "features" / f"{idx:05d}_{entry.speaker_id}_{Path(entry.path).stem}.feat"
        try:
            features = extract_features(load_wav(entry.path), config)
        except (OSError, WavError, ValueError) as exc:
            failures.append((entry.path, str(exc)))
            logger.error("%s: %s", entry.path, exc)
            if not args.keep_going:
                return EXIT_DATA
            continue
        save_features(target, features, config.fingerprint())
        done.append(dataclasses.replace(entry, path=str(target)))
    atomic_write_text(out_dir / MANIFEST_NAME, format_manifest(done, relative_to=out_dir))
    print(f"extracted {len(done)} file(s), {len(failures)} failure(s)")
    for path, msg in failures:
        print(f"  FAILED {path}: {msg}")
    return EXIT_DATA if failures and not args.keep_going else EXIT_OK


def cmd_train(args) -> int:
    train_config = _from_args(TrainConfig, args)
    feature_config = _from_args(FeatureConfig, args)
    entries = _read_manifest(args.manifest)
    by_speaker = defaultdict(list)
    fingerprints = set()
    for entry in entries:
        by_speaker.setdefault(entry.speaker_id, [])
        if entry.split != "train":
            continue
        features, fp = _load_or_fail(entry, feature_config)
        by_speaker[entry.speaker_id].append(features)
        fingerprints.add(fp)
    missing = sorted(sid for sid, data in by_speaker.items() if not data)
    if missing:
        raise DataError(f"speaker(s) with zero training utterances: {', '.join(missing)}")
    if not by_speaker:
        raise DataError("manifest has no training utterances")
    if len(fingerprints) > 1:
        raise DataError(f"training features come from different configurations: {sorted(fingerprints)}")
    feature_fp = fingerprints.pop()
    train_fp = _fingerprint(train_config)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for sid in sorted(by_speaker):
        model, report = train_speaker(train_config, by_speaker[sid], return_report=True)
        save_model(out_dir / f"{sid}.model", model, feature_fp, train_fp)
        atomic_write_text(out_dir / f"{sid}.report.json", json.dumps(report.to_dict(), indent=2) + "\n")
        print(f"{sid}: {len(by_speaker[sid])} utterances, {report.iterations_run} iterations, "
              f"log-likelihood {report.log_likelihoods[-1]:.6g}")
    return EXIT_OK


def load_registry(models_dir) -> SpeakerRegistry:
    paths = sorted(Path(models_dir).glob("*.model"))
    if not paths:
        raise DataError(f"no .model files in {models_dir}")
    registry = SpeakerRegistry()
    fps = set()
    for p in paths:
        try:
            mf = load_model(p)
            registry.add(p.stem, mf.model)
        except (OSError, ModelFormatError, ValueError) as exc:
            raise DataError(f"{p}: {exc}") from exc
        fps.add((mf.feature_fingerprint, mf.train_fingerprint))
    if len({f for f, _ in fps}) > 1:
        raise DataError("models were trained on different feature configurations")
    registry.feature_fingerprint, registry.train_fingerprint = next(iter(fps))
    return registry


def _check_fingerprint(registry: SpeakerRegistry, fp: str, where: str) -> None:
    if registry.feature_fingerprint and fp != registry.feature_fingerprint:
        raise DataError(
            f"{where}: feature configuration {fp} does not match the models' {registry.feature_fingerprint}"
        )


def cmd_evaluate(args) -> int:
    feature_config = _from_args(FeatureConfig, args)
    registry = load_registry(args.models_dir)
    test = []
    for entry in _read_manifest(args.manifest):
        if entry.split != "test":
            continue
        features, fp = _load_or_fail(entry, feature_config)
        _check_fingerprint(registry, fp, entry.path)
        test.append(LabeledUtterance(entry.speaker_id, entry.environment, features, entry.path))
    if not test:
        raise DataError("manifest has no test utterances")
    try:
        report = evaluate(registry, test, args.scoring)
    except UnknownSpeakerError as exc:
        raise DataError(exc.args[0]) from exc

    report_path = Path(args.report)
    table = report.table()
    atomic_write_text(report_path, table + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["speaker_id", "environment", "predicted", "correct", "score", "path"])
    for d in report.decisions:
        writer.writerow([d.speaker_id, d.environment, d.predicted, int(d.correct), f"{d.score:.17g}", d.path])
    atomic_write_text(report_path.with_name(report_path.name + ".csv"), buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["environment", "speaker_id", "predicted", "count"])
    for env in report.environments:
        for (true, pred), count in sorted(report.confusion(env).items()):
            writer.writerow([env, true, pred, count])
    atomic_write_text(report_path.with_name(report_path.name + ".confusion.csv"), buf.getvalue())
    print(table)
    return EXIT_OK


def cmd_identify(args) -> int:
    feature_config = _from_args(FeatureConfig, args)
    registry = load_registry(args.models_dir)
    try:
        features, fp = load_utterance(args.utterance, feature_config)
    except (OSError, ValueError) as exc:
        raise DataError(f"{args.utterance}: {exc}") from exc
    _check_fingerprint(registry, fp, args.utterance)
    try:
        winner, _ = identify(registry, features, args.scoring)
        rows = score_all(registry, features)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(f"identified: {winner}")
    print(f"{'speaker':<20}{'viterbi':>18}{'forward':>18}")
    for row in rows:
        print(f"{row.speaker_id:<20}{row.viterbi:>18.6f}{row.forward:>18.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = SynthSpec.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DataError(f"{args.spec}: {exc}") from exc
    corpus = generate(spec)
    out_dir = Path(args.out_dir)
    fp = spec.fingerprint()
    entries = []
    for sid in sorted(corpus.train):
        for u, feats in enumerate(corpus.train[sid]):
            path = out_dir / "features" / f"{sid}_train_neutral_{u:03d}.feat"
            save_features(path, feats, fp)
            entries.append(ManifestEntry(sid, "neutral", "train", str(path)))
        tests = [x for x in corpus.test if x.speaker_id == sid]
        for u, utt in enumerate(tests):
            path = out_dir / "features" / f"{sid}_test_{utt.environment}_{u:03d}.feat"
            save_features(path, utt.features, fp)
            entries.append(ManifestEntry(sid, utt.environment, "test", str(path)))
    atomic_write_text(out_dir / MANIFEST_NAME, format_manifest(entries, relative_to=out_dir))
    atomic_write_text(out_dir / "spec.json", json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(entries)} utterances for {spec.num_speakers} speakers to {out_dir}")
    return EXIT_OK


def read_column(path, column=None) -> list:
    """Numeric values from one CSV column; a non-numeric first row is a header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data")
    if column is None or column.isdigit():
        idx = int(column or 0)
        try:
            float(rows[0][idx])
        except (ValueError, IndexError):
            rows = rows[1:]
    else:
        header, rows = [c.strip() for c in rows[0]], rows[1:]
        if column not in header:
            raise DataError(f"{path}: no column {column!r}")
        idx = header.index(column)
    try:
        return [float(r[idx]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: non-numeric or missing value in column {idx}") from exc


def cmd_ttest(args) -> int:
    a = read_column(args.csv1, args.column)
    b = read_column(args.csv2, args.column)
    if len(a) != len(b):
        raise DataError(f"samples must have equal length, got {len(a)} and {len(b)}")
    try:
        result = t_test(a, b, args.critical)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    verdict = "significant" if result.significant else "not significant"
    print(f"t = {result.t_value:.4f} (critical {result.critical_value:g}): {verdict}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hohmm", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="WAV files -> MFCC+delta feature dumps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--keep-going", action="store_true", help="continue past unreadable files")
    _add_dataclass_flags(p, FeatureConfig)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one model per speaker from the train split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    _add_dataclass_flags(p, TrainConfig)
    _add_dataclass_flags(p, FeatureConfig)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="identify every test utterance and report accuracies",
                       epilog=REPORT_CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--manifest", required=True)
    p.add_argument("--models-dir", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--scoring", choices=SCORINGS, default="viterbi")
    _add_dataclass_flags(p, FeatureConfig)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("identify", help="identify the speaker of one utterance")
    p.add_argument("utterance", help="WAV file or feature dump")
    p.add_argument("--models-dir", required=True)
    p.add_argument("--scoring", choices=SCORINGS, default="viterbi")
    _add_dataclass_flags(p, FeatureConfig)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--spec", required=True, help="JSON file with SynthSpec fields")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ttest", help="t statistic with pooled SD between two CSV columns")
    p.add_argument("csv1")
    p.add_argument("csv2")
    p.add_argument("--critical", type=float, default=CRITICAL_T_005)
    p.add_argument("--column", default=None, help="column name or 0-based index (default: first)")
    p.set_defaults(func=cmd_ttest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError) as exc:
        logger.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
