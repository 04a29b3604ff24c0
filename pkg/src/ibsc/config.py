"""Pipeline configuration: defaults, validation and the INI-style file format.

Example::

    # paths are relative to the config file
    [paths]
    features = data/features.csv
    attributes_continuous = data/attr_cont.csv
    attributes_binary = data/attr_bin.csv
    split = data/split.txt
    out = runs/demo

    [relation]
    lambda = 0.05

    [construct]
    k = 5
    auto_k = false
    k_max = 5
    shortlist = 10

    [screen]
    keep_fraction = 0.5

    [eval]
    classifier = linear_ovr

    [run]
    seed = 0

A ``[synth]`` section (keys of :class:`~ibsc.synthgen.SynthConfig`) makes the
``synth`` and ``pipeline`` commands generate the input files first.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

CLASSIFIERS = ("nearest_centroid", "linear_ovr")

# key in the file -> (section, attribute)
_KEYS = {
    "features": ("paths", "features"),
    "features_format": ("paths", "features_format"),
    "attributes_continuous": ("paths", "attributes_continuous"),
    "attributes_binary": ("paths", "attributes_binary"),
    "split": ("paths", "split"),
    "out": ("paths", "out"),
    "lambda": ("relation", "lam"),
    "k": ("construct", "k"),
    "auto_k": ("construct", "auto_k"),
    "k_max": ("construct", "k_max"),
    "shortlist": ("construct", "shortlist"),
    "keep_fraction": ("screen", "keep_fraction"),
    "classifier": ("eval", "classifier"),
    "classifier_lambda": ("eval", "classifier_lambda"),
    "seed": ("run", "seed"),
    "threads": ("run", "threads"),
}


@dataclass
class PipelineConfig:
    features: str | None = None
    features_format: str = "csv"
    attributes_continuous: str | None = None
    attributes_binary: str | None = None
    split: str | None = None
    out: str = "out"
    lam: float = 0.05
    k: int = 5
    auto_k: bool = False
    k_max: int = 5
    shortlist: int = 10
    keep_fraction: float = 0.5
    classifier: str = "linear_ovr"
    classifier_lambda: float = 0.01
    seed: int = 0
    threads: int | None = None
    synth: dict = field(default_factory=dict)

    def validate(self) -> "PipelineConfig":
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.auto_k and self.k_max < 2:
            raise ConfigError(f"k_max must be >= 2 with auto_k, got {self.k_max}")
        if self.shortlist < 1:
            raise ConfigError(f"shortlist must be >= 1, got {self.shortlist}")
        if not 0 < self.keep_fraction <= 1:
            raise ConfigError(f"keep_fraction must lie in (0, 1], got {self.keep_fraction}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if not self.classifier_lambda > 0:
            raise ConfigError("classifier_lambda must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.features_format not in ("csv", "binary"):
            raise ConfigError(f"features_format must be csv or binary, got {self.features_format!r}")
        return self

    def worker_count(self) -> int:
        return self.threads or os.cpu_count() or 1

    def echo(self) -> dict:
        """Numeric settings, as echoed into reports (paths and threads excluded)."""
        d = asdict(self)
        for key in ("features", "features_format", "attributes_continuous", "attributes_binary",
                    "split", "out", "threads", "synth"):
            d.pop(key)
        return d


def _convert(name: str, raw: str):
    types = {f.name: f.type for f in fields(PipelineConfig)}
    kind = types[name]
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in ("int", "int | None"):
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw.strip()


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                       delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {' '.join(str(exc).split())}") from None
    cfg = PipelineConfig()
    known_sections = {s for s, _ in _KEYS.values()} | {"synth"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if section == "synth":
                cfg.synth[key] = raw
                continue
            if key not in _KEYS or _KEYS[key][0] != section:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            attr = _KEYS[key][1]
            setattr(cfg, attr, _convert(attr, raw))
    base = path.parent
    for attr in ("features", "attributes_continuous", "attributes_binary", "split", "out"):
        value = getattr(cfg, attr)
        if value is not None and not Path(value).is_absolute():
            setattr(cfg, attr, str(base / value))
    return cfg.validate()
