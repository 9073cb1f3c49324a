"""Run configuration: an INI file with one section per module.

Example::

    [datasets]
    path = water.csv
    train_size = 1000

    [projection]
    matrices = 1d

    [gpr]
    length_scale = 0.6
    noise_variance = 1e-11

    [hdmr]
    cycles = 50
    scale_start = 0.1
    scale_rate = 1

Unknown sections or keys are rejected.  Relative paths resolve against the
directory holding the config file.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InputError


class ConfigError(InputError):
    def __init__(self, key, message):
        super().__init__(f"config field {key}: {message}")
        self.key = key


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return [int(v) for v in text.replace(",", " ").split()]


@dataclass
class RunConfig:
    # [datasets]
    path: Path | None = None
    generator: str | None = None
    n: int = 10000
    d: int = 3
    n_normal: int = 10000
    n_uniform: int = 5000
    noise: float = 0.0
    missing_per_column: int = 0
    missing_columns: list | None = None
    scale: str = "minmax"
    train_size: int | None = None
    eval_path: Path | None = None
    truth_path: Path | None = None
    # [projection]
    matrices: str = "1d"
    # [gpr]
    length_scale: float = 0.6
    noise_variance: float = 1e-10
    # [hdmr]
    cycles: int = 50
    scale_start: float = 0.1
    scale_rate: float = 2.0
    # [imputation]
    delta: float = 0.0
    subintervals: int = 1000
    brackets: bool = True
    report: Path | None = None
    # [run]
    seed: int = 0
    out: Path = field(default_factory=lambda: Path("out"))


SECTIONS = {
    "datasets": {
        "path": Path, "generator": str, "n": int, "d": int, "n_normal": int, "n_uniform": int,
        "noise": float, "missing_per_column": int, "missing_columns": _int_list, "scale": str,
        "train_size": int, "eval_path": Path, "truth_path": Path,
    },
    "projection": {"matrices": str},
    "gpr": {"length_scale": float, "noise_variance": float},
    "hdmr": {"cycles": int, "scale_start": float, "scale_rate": float},
    "imputation": {"delta": float, "subintervals": int, "brackets": _bool, "report": Path},
    "run": {"seed": int, "out": Path},
}

SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}
GENERATOR_NAMES = ("additive", "power", "coupled", "quartic", "uneven")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("--config", f"file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError("--config", f"cannot parse {path}: {exc}") from exc
    cfg = RunConfig()
    base = path.parent
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, f"unknown section (known: {', '.join(SECTIONS)})")
        for key, text in parser.items(section):
            name = f"{section}.{key}"
            if key not in SECTIONS[section]:
                raise ConfigError(name, "unknown key")
            conv = SECTIONS[section][key]
            try:
                value = conv(text.strip())
            except ValueError as exc:
                raise ConfigError(name, str(exc)) from exc
            if conv is Path and not value.is_absolute():
                value = base / value
            setattr(cfg, key, value)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    def check(key, ok, message):
        if not ok:
            raise ConfigError(f"{SECTION_OF[key]}.{key}", message)

    check("generator", cfg.generator is None or cfg.generator in GENERATOR_NAMES,
          f"must be one of {GENERATOR_NAMES}")
    check("scale", cfg.scale in ("minmax", "none"), "must be 'minmax' or 'none'")
    check("n", cfg.n >= 1, "must be >= 1")
    check("d", cfg.d >= 1, "must be >= 1")
    check("n_normal", cfg.n_normal >= 0, "must be >= 0")
    check("n_uniform", cfg.n_uniform >= 0, "must be >= 0")
    check("noise", cfg.noise >= 0, "must be >= 0")
    check("missing_per_column", cfg.missing_per_column >= 0, "must be >= 0")
    check("train_size", cfg.train_size is None or cfg.train_size >= 1, "must be >= 1")
    check("length_scale", cfg.length_scale > 0, "must be > 0")
    check("noise_variance", cfg.noise_variance >= 0, "must be >= 0")
    check("cycles", cfg.cycles >= 1, "must be >= 1")
    check("scale_start", 0 < cfg.scale_start <= 1, "must lie in (0, 1]")
    check("scale_rate", cfg.scale_rate > 0, "must be > 0")
    check("delta", cfg.delta >= 0, "must be >= 0")
    check("subintervals", cfg.subintervals >= 1, "must be >= 1")
    check("seed", cfg.seed >= 0, "must be >= 0")


def require_file(cfg: RunConfig, key: str) -> Path:
    """Return the path stored under ``key``, raising unless it names an existing file."""
    value = getattr(cfg, key)
    name = f"{SECTION_OF[key]}.{key}"
    if value is None:
        raise ConfigError(name, "required for this command")
    if not Path(value).is_file():
        raise ConfigError(name, f"file not found: {value}")
    return Path(value)


def to_text(cfg: RunConfig) -> str:
    """Serialize back to INI text (used to record the effective config of a run)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for section, keys in SECTIONS.items():
        parser.add_section(section)
        for key in keys:
            v = values[key]
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(str(i) for i in v)
            parser.set(section, key, str(v))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
