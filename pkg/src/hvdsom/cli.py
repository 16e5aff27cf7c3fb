"""Command line entry point: ``hvdsom <synth|extract|evaluate|report> --config PATH``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import fcntl
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .corpus import CorpusError, Manifest, read_manifest
from .evaluation import TooFewTokens, run_cv
from .featcache import extract_all, load_features
from .reports import reports_from_folds, summary_text, table_text, write_reports
from .synth import CorpusSpec, generate_corpus

log = logging.getLogger("hvdsom")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
LOCK_NAME = ".hvdsom.lock"


class DataError(Exception):
    pass


@contextmanager
def output_lock(out: Path):
    """Advisory lock: one process owns an output directory at a time."""
    out.mkdir(parents=True, exist_ok=True)
    with open(out / LOCK_NAME, "w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise DataError(f"{out} is locked by another hvdsom process") from None
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def manifest_path(config: ExperimentConfig) -> Path:
    return config.manifest or config.output_dir / "corpus" / "manifest.tsv"


def _manifest(config: ExperimentConfig) -> Manifest:
    return read_manifest(manifest_path(config))


def cmd_synth(config: ExperimentConfig) -> int:
    spec = CorpusSpec(speakers=config.speakers, tokens_per_word=config.tokens_per_word,
                      sample_rate=config.sample_rate, seed=config.seed,
                      overlap_factor=config.overlap_factor, group=config.group)
    manifest = generate_corpus(spec, config.output_dir / "corpus")
    print(f"wrote {len(manifest.utterances)} utterances; manifest {manifest.path}")
    return EXIT_OK


def cmd_extract(config: ExperimentConfig) -> int:
    manifest = _manifest(config)
    computed, failures = extract_all(manifest, config.frame, config.output_dir / "features")
    print(f"features: {computed} computed, {len(manifest.utterances) - computed - len(failures)} cached, "
          f"{len(failures)} failed")
    for msg in failures:
        print(f"  failed: {msg}", file=sys.stderr)
    return EXIT_DATA if failures else EXIT_OK


def cmd_evaluate(config: ExperimentConfig) -> int:
    manifest = _manifest(config)
    _, failures = extract_all(manifest, config.frame, config.output_dir / "features")
    if failures:
        raise DataError(f"{len(failures)} utterances failed feature extraction, first: {failures[0]}")
    features = load_features(manifest, config.output_dir / "features")
    result = run_cv(manifest, features, config)
    write_reports(config.output_dir, config, result)
    print(table_text(result.reports), end="")
    return EXIT_OK


def cmd_report(config: ExperimentConfig) -> int:
    folds = config.output_dir / "folds.tsv"
    if not folds.exists():
        raise DataError(f"{folds} not found; run evaluate first")
    print(summary_text(reports_from_folds(folds.read_text(encoding="utf-8"))), end="")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "evaluate": cmd_evaluate, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvdsom", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="experiment config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output_dir"] = args.out
        config = dataclasses.replace(config, **overrides)
    except ConfigError as exc:
        print(f"hvdsom: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with output_lock(config.output_dir):
            return COMMANDS[args.command](config)
    except (DataError, CorpusError, TooFewTokens, FileNotFoundError, ValueError) as exc:
        print(f"hvdsom {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        where = exc.filename or config.output_dir
        print(f"hvdsom {args.command}: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
