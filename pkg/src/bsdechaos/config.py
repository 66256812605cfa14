"""Flat ``key = value`` experiment configs with ``[section]`` headers.

Grammar (one item per line)::

    # comment            ignored, as are blank lines and trailing `` # ...``
    [section]            starts a section; keys before any header are invalid
    key = value          value types are fixed per key (int, float, str, int list)

Unknown sections or keys, duplicates and malformed values are errors that
carry the line number.  :func:`dump_config` writes every key in canonical
order, so ``parse_config(dump_config(c)) == c``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

# section -> key -> (type, default)
SCHEMA = {
    "run": {
        "seed": (int, 0),
        "threads": (int, 1),
        "out": (str, ""),
        "backend": (str, "tree"),
        "tol": (float, 0.0),
        "q_max": (int, 60),
        "beta_hat": (float, 240.0),
        "max_nodes": (int, 1_000_000),
        "particles": (int, 4096),
    },
    "driver": {
        "mode": (str, "rademacher"),
        "k": (int, 4),
        "ks": (list, [4, 8, 16, 32]),
        "horizon": (float, 1.0),
        "skeleton_steps": (int, 0),
        "jump_share": (float, 0.5),
        "mark_scale": (float, 1.0),
    },
    "generator": {
        "a": (float, 0.0),
        "bz": (float, 0.0),
        "bu": (float, 0.0),
        "e": (float, 0.0),
        "c0": (float, 0.0),
    },
    "terminal": {
        "payoff": (str, "identity"),
        "kappa": (float, 0.0),
        "gamma": (float, 1.0),
        "theta": (str, "identity"),
    },
    "sweep": {
        "Ns": (list, [8, 16, 32, 64]),
        "reps": (int, 20),
        "players": (int, 2),
        "reference_k": (int, 0),
        "n_paths": (int, 2000),
        "pool": (int, 0),
        "mean_field_N": (int, 0),
    },
    "fg": {
        "eps": (float, 0.1),
        "cd": (float, 1.0),
        "r0": (float, 1.0),
        "dim": (int, 1),
        "n": (int, 64),
        "law": (str, "uniform"),
        "atoms": (int, 4096),
    },
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {s: {k: (list(d) if isinstance(d, list) else d)
                                                      for k, (_, d) in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def __getitem__(self, key: str):
        section, name = key.split(".", 1)
        return self.values[section][name]

    def set(self, key: str, value) -> None:
        section, name = key.split(".", 1)
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r}")
        typ = SCHEMA[section][name][0]
        self.values[section][name] = _coerce(typ, value, key)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values


def _coerce(typ, value, key, line=None):
    try:
        if typ is list:
            if isinstance(value, (list, tuple)):
                out = [int(v) for v in value]
            else:
                text = str(value).strip()
                out = [int(v) for v in text.split(",")] if text else []
            return out
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value) if not isinstance(value, str) else int(value.strip())
        if typ is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError(value)
            return v
        return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {value!r} for {key} (expected {typ.__name__})", line) from None


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = re.split(r"\s#", raw, maxsplit=1)[0].strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        full = f"{section}.{key}"
        if full in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        seen.add(full)
        cfg.values[section][key] = _coerce(SCHEMA[section][key][0], value, full, lineno)
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror}") from None
    return parse_config(text)


def _render(v) -> str:
    if isinstance(v, list):
        return ",".join(str(int(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_render(cfg.values[section][key])}")
        lines.append("")
    return "\n".join(lines)
