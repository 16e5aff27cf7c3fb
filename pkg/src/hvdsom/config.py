"""Experiment configuration: one INI-style key/value file.

Every map size, framing constant and fold count lives here as a default;
call sites never hard-code them.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .features import FrameSpec

STRATEGIES = ("single", "confusion", "linguistic")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    manifest: Path | None = None
    output_dir: Path = Path("hvdsom-out")
    seed: int = 0

    # synthetic corpus, written to <output_dir>/corpus
    speakers: int = 11
    tokens_per_word: int = 2
    sample_rate: int = 16000
    overlap_factor: float = 1.0
    group: str = "General"

    frame: FrameSpec = field(default_factory=FrameSpec)

    base_rows: int = 25
    base_cols: int = 25
    sub_rows: int = 20
    sub_cols: int = 20
    steps_per_sample: float = 20.0
    max_steps: int = 500_000
    ordering_fraction: float = 0.25
    zscore: bool = False

    k: int = 10
    calibration_fraction: float = 0.75
    target_groups: int = 3
    strategies: tuple[str, ...] = STRATEGIES
    force_inert: bool = False

    def __post_init__(self):
        bad = set(self.strategies) - set(STRATEGIES)
        if bad:
            raise ConfigError(f"unknown strategies {sorted(bad)}; choose from {STRATEGIES}")
        if not 0 < self.calibration_fraction < 1:
            raise ConfigError("calibration_fraction must lie in (0, 1)")
        if self.k < 2:
            raise ConfigError("k must be >= 2")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return json.loads(json.dumps(d, default=str, sort_keys=True))

    def digest(self) -> str:
        """Hash of everything that affects results (not where they go)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_SECTIONS = {
    "run": ("manifest", "output_dir", "seed"),
    "corpus": ("speakers", "tokens_per_word", "sample_rate", "overlap_factor", "group"),
    "som": ("base_rows", "base_cols", "sub_rows", "sub_cols", "steps_per_sample", "max_steps",
            "ordering_fraction", "zscore"),
    "evaluation": ("k", "calibration_fraction", "target_groups", "strategies", "force_inert"),
}


def _coerce(name: str, raw: str, current, where: str):
    try:
        if isinstance(current, bool):
            return configparser.ConfigParser.BOOLEAN_STATES[raw.lower()]
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if isinstance(current, Path) or current is None:
            return Path(raw)
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"{where}: bad value {raw!r} for {name}") from None


def load_config(path) -> ExperimentConfig:
    """Read a config file. Relative paths resolve against the file's directory."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    defaults = ExperimentConfig()
    values: dict = {}
    for section in parser.sections():
        if section == "features":
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = _coerce(key, raw, getattr(defaults, key), f"{path} [{section}]")

    if parser.has_section("features"):
        frame_defaults = FrameSpec()
        names = {f.name for f in dataclasses.fields(FrameSpec)}
        kw = {}
        for key, raw in parser.items("features"):
            if key not in names:
                raise ConfigError(f"{path}: unknown key {key!r} in [features]")
            kw[key] = _coerce(key, raw, getattr(frame_defaults, key), f"{path} [features]")
        values["frame"] = FrameSpec(**kw)

    for key in ("manifest", "output_dir"):
        if key in values and not values[key].is_absolute():
            values[key] = path.parent / values[key]
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
