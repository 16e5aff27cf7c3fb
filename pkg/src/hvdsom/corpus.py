"""Corpus manifest and segment annotation files.

Annotation file: tab separated, one segment per line::

    <utterance id>  <ASCII label>  <start seconds>  <end seconds>

Manifest: first line ``#hvdsom-manifest v1 sample_rate=<Hz>``, then a tab
separated header row and one record per utterance::

    utt_id  audio  annotation  speaker  word  group  role

``annotation`` is ``-`` for unlabelled records; paths are relative to the
manifest's directory. Lines starting with ``#`` after the first are comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import phonemes

MANIFEST_MAGIC = "#hvdsom-manifest v1"
MANIFEST_COLUMNS = ("utt_id", "audio", "annotation", "speaker", "word", "group", "role")
ROLES = ("unlabelled", "annotated")


class CorpusError(ValueError):
    """Malformed corpus input; the message names the file and line."""


@dataclass(frozen=True)
class Segment:
    label: str
    start: float
    end: float


@dataclass
class Utterance:
    utt_id: str
    audio: Path
    speaker: str
    word: str
    group: str
    role: str
    annotation: Path | None = None
    segments: list[Segment] = field(default_factory=list)

    @property
    def vowel(self) -> str:
        return phonemes.WORDS[self.word]


@dataclass
class Manifest:
    sample_rate: int
    utterances: list[Utterance]
    path: Path | None = None

    def annotated(self) -> list[Utterance]:
        return [u for u in self.utterances if u.role == "annotated"]

    def unlabelled(self, group: str | None = None) -> list[Utterance]:
        return [u for u in self.utterances
                if u.role == "unlabelled" and (group is None or u.group == group)]

    def groups(self) -> list[str]:
        seen: dict[str, None] = {}
        for u in self.utterances:
            if u.role == "unlabelled":
                seen.setdefault(u.group)
        return list(seen)


def write_annotation(path, utt_id: str, segments) -> None:
    lines = [f"{utt_id}\t{phonemes.to_ascii(s.label)}\t{s.start!r}\t{s.end!r}\n" for s in segments]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_annotation(path, utt_id: str | None = None) -> list[Segment]:
    path = Path(path)
    segments = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise CorpusError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        uid, label, start, end = parts
        if utt_id is not None and uid != utt_id:
            raise CorpusError(f"{path}:{lineno}: utterance id {uid!r}, expected {utt_id!r}")
        try:
            seg = Segment(phonemes.from_ascii(label), float(start), float(end))
        except ValueError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
        if not seg.end > seg.start:
            raise CorpusError(f"{path}:{lineno}: segment end {seg.end} not after start {seg.start}")
        segments.append(seg)
    return segments


def write_manifest(path, manifest: Manifest) -> None:
    path = Path(path)
    base = path.parent
    out = [f"{MANIFEST_MAGIC} sample_rate={manifest.sample_rate}", "\t".join(MANIFEST_COLUMNS)]
    for u in manifest.utterances:
        ann = "-" if u.annotation is None else _relative(u.annotation, base)
        out.append("\t".join([u.utt_id, _relative(u.audio, base), ann, u.speaker, u.word, u.group, u.role]))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def _relative(p: Path, base: Path) -> str:
    p = Path(p)
    try:
        return p.relative_to(base).as_posix()
    except ValueError:
        return str(p)


def read_manifest(path, load_annotations: bool = True) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"{path}: manifest not found")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(MANIFEST_MAGIC):
        raise CorpusError(f"{path}:1: missing '{MANIFEST_MAGIC}' header")
    try:
        opts = dict(kv.split("=", 1) for kv in lines[0][len(MANIFEST_MAGIC):].split())
        rate = int(opts["sample_rate"])
    except (KeyError, ValueError):
        raise CorpusError(f"{path}:1: header must declare sample_rate=<Hz>") from None
    if len(lines) < 2 or tuple(lines[1].split("\t")) != MANIFEST_COLUMNS:
        raise CorpusError(f"{path}:2: expected column header {' '.join(MANIFEST_COLUMNS)}")

    base = path.parent
    utterances: list[Utterance] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[2:], 3):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != len(MANIFEST_COLUMNS):
            raise CorpusError(f"{path}:{lineno}: expected {len(MANIFEST_COLUMNS)} fields, got {len(parts)}")
        uid, audio, ann, speaker, word, group, role = parts
        if uid in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate utterance id {uid!r}")
        if word not in phonemes.WORDS:
            raise CorpusError(f"{path}:{lineno}: unknown /hVd/ word {word!r}")
        if role not in ROLES:
            raise CorpusError(f"{path}:{lineno}: role must be one of {ROLES}, got {role!r}")
        if role == "annotated" and ann == "-":
            raise CorpusError(f"{path}:{lineno}: annotated record {uid!r} has no annotation path")
        seen.add(uid)
        utt = Utterance(uid, base / audio, speaker, word, group, role,
                        annotation=None if ann == "-" else base / ann)
        if load_annotations and utt.annotation is not None:
            if not utt.annotation.is_file():
                raise CorpusError(f"{path}:{lineno}: annotation file {utt.annotation} not found")
            utt.segments = read_annotation(utt.annotation, uid)
        utterances.append(utt)
    return Manifest(rate, utterances, path)
