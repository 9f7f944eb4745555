"""Experiment configuration: plain-text ``section.key = value`` lines.

A profile (``desk`` or ``paper``) supplies defaults for every key; the file
only needs the keys it overrides.  ``#`` starts a comment.
"""

from dataclasses import dataclass, field, fields
from pathlib import Path

from . import _io
from .errors import ConfigError
from .neuralnet import TrainConfig
from .shapegen import default_config

__all__ = ["PROFILES", "ExperimentConfig", "parse_config", "load_config", "profile_defaults"]

PROFILES = ("desk", "paper")

_TRAIN_KEYS = {f.name: f.type for f in fields(TrainConfig)}


@dataclass
class ModelSection:
    train: TrainConfig
    hidden: list = field(default_factory=list)  # surrogate hidden / decoder hidden
    encoder_hidden: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    profile: str = "desk"
    seed: int = 0
    out: str = "run"
    n_sections: int = 3
    pts_per_section: int = 28
    n_span: int = 28
    S_requested: int = 2048
    skip: int = 1
    surrogate: ModelSection = None
    nlpme: ModelSection = None
    dae: ModelSection = None
    sweep_N: list = field(default_factory=list)
    taus: list = field(default_factory=lambda: [0.05, 0.01])
    n_bins: int = 50

    def generator(self):
        try:
            return default_config(self.n_sections, self.pts_per_section, self.n_span)
        except ValueError as exc:
            raise ConfigError(f"invalid generator layout: {exc}") from exc

    @property
    def M(self):
        return self.generator().M

    def items(self):
        """Flat ``(key, value)`` pairs in a fixed order (the canonical form)."""
        out = [
            ("run.profile", self.profile),
            ("run.seed", self.seed),
            ("run.out", self.out),
            ("generator.n_sections", self.n_sections),
            ("generator.pts_per_section", self.pts_per_section),
            ("generator.n_span", self.n_span),
            ("sampling.S_requested", self.S_requested),
            ("sampling.skip", self.skip),
        ]
        for name in ("surrogate", "nlpme", "dae"):
            sec = getattr(self, name)
            for f in fields(TrainConfig):
                out.append((f"{name}.{f.name}", getattr(sec.train, f.name)))
            out.append((f"{name}.hidden", sec.hidden))
            if name != "surrogate":
                out.append((f"{name}.encoder_hidden", sec.encoder_hidden))
        out += [("sweep.N", self.sweep_N), ("sweep.taus", self.taus), ("report.n_bins", self.n_bins)]
        return out

    def to_text(self):
        def fmt(v):
            return ",".join(map(repr, v)) if isinstance(v, list) else str(v)

        return "".join(f"{k} = {fmt(v)}\n" for k, v in self.items())

    def hash(self):
        """Hash of everything that determines results (the output directory excluded)."""
        text = "".join(line for line in self.to_text().splitlines(True) if not line.startswith("run.out"))
        return _io.text_hash(text + self.generator().to_text())


def _desk_train(**kw):
    base = dict(max_epochs=120, plateau_patience=10, early_stop_patience=40)
    base.update(kw)
    return TrainConfig(**base)


def profile_defaults(profile, M=10):
    if profile == "desk":
        return ExperimentConfig(
            profile="desk",
            surrogate=ModelSection(_desk_train(max_epochs=150), [128, 512, 1024]),
            nlpme=ModelSection(_desk_train(), [64, 32], [256, 256, 128]),
            dae=ModelSection(_desk_train(weight_decay=2.5e-4), [128, 256, 256], [256, 256, 128]),
            sweep_N=list(range(1, M)),
        )
    if profile == "paper":
        return ExperimentConfig(
            profile="paper",
            surrogate=ModelSection(TrainConfig(), [128, 512, 1024]),
            nlpme=ModelSection(TrainConfig(), [256, 128], [1024, 1024, 512]),
            dae=ModelSection(TrainConfig(weight_decay=2.5e-4), [512, 1024, 1024], [1024, 1024, 512]),
            sweep_N=list(range(1, 33)),
        )
    raise ConfigError(f"unknown profile {profile!r}; choose from {PROFILES}")


def _int_list(text):
    text = text.strip().strip("[]")
    items = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            items += list(range(int(lo), int(hi) + 1))
        elif part:
            items.append(int(part))
    return items


def _float_list(text):
    return [float(p) for p in text.strip().strip("[]").split(",") if p.strip()]


def _convert(key, text, kind):
    try:
        if kind == "int_list":
            return _int_list(text)
        if kind == "float_list":
            return _float_list(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


_TOP = {
    "run.seed": ("seed", int),
    "run.out": ("out", str),
    "generator.n_sections": ("n_sections", int),
    "generator.pts_per_section": ("pts_per_section", int),
    "generator.n_span": ("n_span", int),
    "sampling.S_requested": ("S_requested", int),
    "sampling.skip": ("skip", int),
    "sweep.N": ("sweep_N", "int_list"),
    "sweep.taus": ("taus", "float_list"),
    "report.n_bins": ("n_bins", int),
}


def _read_pairs(text):
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_config(text, profile=None):
    """Build a config from text; ``profile`` overrides any ``run.profile`` line."""
    pairs = _read_pairs(text)
    named = [v for k, v in pairs if k == "run.profile"]
    profile = profile or (named[-1] if named else "desk")
    cfg = profile_defaults(profile)
    train_changes = {"surrogate": {}, "nlpme": {}, "dae": {}}
    for key, value in pairs:
        if key == "run.profile":
            continue
        if key in _TOP:
            attr, kind = _TOP[key]
            setattr(cfg, attr, _convert(key, value, kind))
            continue
        section, _, name = key.partition(".")
        if section not in train_changes:
            raise ConfigError(f"unknown key {key!r}")
        sec = getattr(cfg, section)
        if name == "hidden":
            sec.hidden = _convert(key, value, "int_list")
        elif name == "encoder_hidden" and section != "surrogate":
            sec.encoder_hidden = _convert(key, value, "int_list")
        elif name in _TRAIN_KEYS:
            train_changes[section][name] = _convert(key, value, _TRAIN_KEYS[name])
        else:
            raise ConfigError(f"unknown key {key!r}")
    for section, changes in train_changes.items():
        sec = getattr(cfg, section)
        sec.train = sec.train.with_(**changes)
    # the default sweep list follows the generator's M unless set explicitly
    if not any(k == "sweep.N" for k, _ in pairs) and profile == "desk":
        cfg.sweep_N = list(range(1, cfg.M))
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.S_requested < 10:
        raise ConfigError("sampling.S_requested must be >= 10")
    if cfg.skip < 0:
        raise ConfigError("sampling.skip must be >= 0")
    if not cfg.sweep_N or any(n < 1 for n in cfg.sweep_N):
        raise ConfigError("sweep.N must be a non-empty list of positive integers")
    if sorted(set(cfg.sweep_N)) != cfg.sweep_N:
        raise ConfigError("sweep.N must be strictly increasing")
    if not cfg.taus or any(t <= 0 for t in cfg.taus):
        raise ConfigError("sweep.taus must be positive")
    if cfg.n_bins < 1:
        raise ConfigError("report.n_bins must be >= 1")
    for name in ("surrogate", "nlpme", "dae"):
        sec = getattr(cfg, name)
        if any(w < 1 for w in sec.hidden + sec.encoder_hidden):
            raise ConfigError(f"{name} widths must be positive")
    cfg.generator()  # raises on an invalid generator layout


def load_config(path, profile=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(), profile)
