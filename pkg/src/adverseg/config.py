"""Run configuration: dataclass, flat key=value config files, flag merging.

Config files are plain text, one `key = value` per line, '#' comments.
Flags always override file values. Unknown keys are refused instead of
silently ignored; that has bitten everyone at least once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

ABLATABLE = ("edfpm", "fsc", "cswp", "mpr", "mprgd")
MODALITY_TOKENS = ("t1", "t2", "dwi")
PHASE_TOKENS = ("a", "pv", "delay")


@dataclass
class TrainConfig:
    data_dir: str = ""
    out_dir: str = ""
    iterations: int = 100
    batch_size: int = 2
    lr: float = 1e-4
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    seed: int = 0
    ablate: tuple[str, ...] = ()
    modalities: tuple[str, ...] = MODALITY_TOKENS
    phases: tuple[str, ...] = PHASE_TOKENS
    swap_disc_labels: bool = False
    cswp_mode: str = "soft"
    optimizer: str = "sgd"
    checkpoint_every: int = 0
    resume: str | None = None

    def validate(self) -> "TrainConfig":
        if self.iterations < 1:
            raise ConfigError(f"iterations must be positive, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        bad = [a for a in self.ablate if a not in ABLATABLE]
        if bad:
            raise ConfigError(f"unknown ablation flags {bad}, know {ABLATABLE}")
        self.ablate = tuple(sorted(set(self.ablate)))
        if not self.modalities or any(m not in MODALITY_TOKENS for m in self.modalities):
            raise ConfigError(f"modalities must be a nonempty subset of {MODALITY_TOKENS}, got {self.modalities}")
        self.modalities = tuple(m for m in MODALITY_TOKENS if m in self.modalities)
        if not self.phases or any(p not in PHASE_TOKENS for p in self.phases):
            raise ConfigError(f"phases must be a nonempty subset of {PHASE_TOKENS}, got {self.phases}")
        self.phases = tuple(p for p in PHASE_TOKENS if p in self.phases)
        if self.cswp_mode not in ("hard", "soft"):
            raise ConfigError(f"cswp_mode must be hard or soft, got {self.cswp_mode!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be sgd or adam, got {self.optimizer!r}")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")
        return self

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_LIST_KEYS = {"ablate", "modalities", "phases"}
_BOOL_KEYS = {"swap_disc_labels"}
_INT_KEYS = {"iterations", "batch_size", "seed", "checkpoint_every"}
_FLOAT_KEYS = {"lr", "lambda1", "lambda2", "lambda3"}


def parse_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        values[key] = val
    return values


def _coerce(key: str, val):
    if not isinstance(val, str):
        return val
    try:
        if key in _INT_KEYS:
            return int(val)
        if key in _FLOAT_KEYS:
            return float(val)
    except ValueError as e:
        raise ConfigError(f"config key {key}: {e}") from None
    if key in _BOOL_KEYS:
        low = val.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key}: not a boolean: {val!r}")
    if key in _LIST_KEYS:
        return tuple(tok.strip() for tok in val.split(",") if tok.strip())
    return val


def build_config(file_values: dict | None = None, flag_values: dict | None = None) -> TrainConfig:
    """Defaults <- config file <- flags, in that precedence order."""
    known = {f.name for f in fields(TrainConfig)}
    cfg = TrainConfig()
    for layer in (file_values or {}), (flag_values or {}):
        for key, val in layer.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if val is None:
                continue
            setattr(cfg, key, _coerce(key, val))
    return cfg.validate()


def config_from_echo(echo: dict, **overrides) -> TrainConfig:
    vals = dict(echo)
    vals.update({k: v for k, v in overrides.items() if v is not None})
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in vals.items()}
    return build_config(flag_values=vals)
