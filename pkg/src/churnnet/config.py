"""Plain-text ``key=value`` configuration files.

Keys may carry dotted sections (``grid.directions=undirected,outgoing``).
Lines starting with ``#`` or ``;`` are comments; ``[section]`` headers
prefix the keys that follow them.
"""
from __future__ import annotations

import hashlib
import json
import zlib
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .exceptions import ConfigError


def parse_config(lines: Iterable[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    section = ""
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if section:
            key = f"{section}.{key}"
        out[key] = value
    return out


def load_config(path: str | Path | None) -> dict[str, str]:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh)


def dump_config(cfg: Mapping[str, Any]) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in sorted(cfg.items()))


def _fmt(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


class Settings:
    """Typed accessor over a flat ``key=value`` mapping."""

    def __init__(self, values: Mapping[str, str] | None = None):
        self.values = dict(values or {})

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def str(self, key: str, default: str) -> str:
        return self.values.get(key, default)

    def int(self, key: str, default: int) -> int:
        v = self.values.get(key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{key}: expected integer, got {v!r}") from None

    def float(self, key: str, default: float) -> float:
        v = self.values.get(key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{key}: expected number, got {v!r}") from None

    def bool(self, key: str, default: bool) -> bool:
        v = self.values.get(key)
        if v is None:
            return default
        lv = v.lower()
        if lv in ("1", "true", "yes", "on"):
            return True
        if lv in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected boolean, got {v!r}")

    def list(self, key: str, default: list[str]) -> list[str]:
        v = self.values.get(key)
        if v is None:
            return list(default)
        return [s.strip() for s in v.split(",") if s.strip()]

    def section(self, prefix: str) -> "Settings":
        p = prefix.rstrip(".") + "."
        return Settings({k[len(p):]: v for k, v in self.values.items() if k.startswith(p)})


def params_hash(params: Mapping[str, Any]) -> str:
    """Short stable digest of a parameter mapping (for report provenance)."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def derive_seed(seed: int, *keys: Any) -> int:
    """Independent 63-bit seed for a named sub-task (stable across runs and processes)."""
    tags = [zlib.crc32(str(k).encode()) for k in keys]
    state = np.random.SeedSequence([int(seed) & (2**63 - 1), *tags]).generate_state(2, np.uint32)
    return int(state[0]) << 31 ^ int(state[1])
