"""Delimited-text reports: the error-rate table, per-fold logs, confusion
matrices and groupings. Every file starts with a provenance line."""

from __future__ import annotations

from pathlib import Path

from . import __version__, phonemes
from .config import STRATEGIES, ExperimentConfig
from .evaluation import ROW_NAMES, CvReport, CvResult

FOLD_COLUMNS = ("group", "fold", "strategy", "n_tokens", "n_errors", "rate")


def provenance(config: ExperimentConfig) -> str:
    return f"# hvdsom {__version__} config={config.digest()} seed={config.seed}\n"


def table_text(reports: list[CvReport]) -> str:
    groups = list(dict.fromkeys(r.group for r in reports))
    strategies = [s for s in STRATEGIES if any(r.strategy == s for r in reports)]
    cells = {(r.strategy, r.group): r.cell() for r in reports}
    lines = ["\t".join(["Type", *groups])]
    for s in strategies:
        lines.append("\t".join([ROW_NAMES[s], *(cells.get((s, g), "-") for g in groups)]))
    return "\n".join(lines) + "\n"


def folds_text(result: CvResult) -> str:
    lines = ["\t".join(FOLD_COLUMNS)]
    for rec in result.folds:
        lines.append(f"{rec.group}\t{rec.fold}\t{rec.strategy}\t{rec.n_tokens}\t{rec.n_errors}\t{rec.rate:.6f}")
    return "\n".join(lines) + "\n"


def decisions_text(result: CvResult) -> str:
    lines = ["group\tfold\tstrategy\tutt_id\ttrue\tpredicted"]
    for rec in result.folds:
        for utt, true, pred in rec.decisions:
            shown = "none" if pred == phonemes.NO_VOWEL else phonemes.to_ascii(pred)
            lines.append(f"{rec.group}\t{rec.fold}\t{rec.strategy}\t{utt}\t{phonemes.to_ascii(true)}\t{shown}")
    return "\n".join(lines) + "\n"


def reports_from_folds(text: str) -> list[CvReport]:
    """Rebuild per-strategy reports from a folds log."""
    rows = [line.split("\t") for line in text.splitlines() if line and not line.startswith("#")]
    if not rows or tuple(rows[0]) != FOLD_COLUMNS:
        raise ValueError("folds log has an unexpected header")
    rates: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for group, fold, strategy, n_tok, n_err, _ in rows[1:]:
        rates.setdefault((strategy, group), []).append((int(fold), int(n_err) / int(n_tok)))
    return [CvReport(s, g, [r for _, r in sorted(v)]) for (s, g), v in rates.items()]


def summary_text(reports: list[CvReport]) -> str:
    out = ["Vowel error rate, mean (standard error) over folds", ""]
    out.append(table_text(reports))
    by_group: dict[str, dict[str, CvReport]] = {}
    for r in reports:
        by_group.setdefault(r.group, {})[r.strategy] = r
    for group, rs in by_group.items():
        if {"single", "confusion", "linguistic"} <= rs.keys():
            single, conf, ling = (rs[s].mean for s in ("single", "confusion", "linguistic"))
            out.append(f"{group}: single-map minus Vowels {single - conf:+.3f}, "
                       f"minus h V d {single - ling:+.3f}; h V d vs Vowels {ling - conf:+.3f}")
    return "\n".join(out) + "\n"


def write_reports(out_dir, config: ExperimentConfig, result: CvResult) -> list[Path]:
    out = Path(out_dir)
    head = provenance(config)
    written = []

    def put(rel: str, body: str):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(head + body, encoding="utf-8")
        written.append(path)

    put("report.tsv", table_text(result.reports))
    put("folds.tsv", folds_text(result))
    put("decisions.tsv", decisions_text(result))
    put("summary.txt", summary_text(result.reports))
    for (group, fold), cm in sorted(result.confusions.items()):
        put(f"confusion/{group}_fold{fold}.tsv", cm.to_text())
    for (group, fold), grouping in sorted(result.groupings.items()):
        put(f"grouping/{group}_fold{fold}.txt", grouping.to_text())
    return written
