"""Run settings, read from a ``key = value`` file and overridden by CLI flags.

The file path may also come from the ``FITRUTH_CONFIG`` environment variable.

Seeds: every random component draws from ``derive_seed(root, *labels)``, a
``numpy.random.SeedSequence`` keyed by the root seed and the CRC32 of each
label, e.g. ``derive_seed(7, "technique", "lime", "instance", 12)``.
"""

from __future__ import annotations

import configparser
import os
import zlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ContractError

CONFIG_ENV = "FITRUTH_CONFIG"
DEFAULT_PRIORITY = ("intrinsic", "permutation", "lime", "kernel_shap")


def derive_seed(root: int, *labels) -> int:
    key = tuple(zlib.crc32(str(label).encode("utf-8")) for label in labels)
    return int(np.random.SeedSequence(int(root), spawn_key=key).generate_state(1)[0])


@dataclass(frozen=True)
class Config:
    delta: float = 0.01
    delta_scope: str = "all"
    mode: str = "deterministic"
    votes: int = 5
    neighbourhood: str = "training"
    zeta: float = 1e-6
    ridge: float = 1e-3
    kernel_width: float | None = None
    lime_samples: int = 1000
    shap_coalitions: int | None = None
    pi_repeats: int = 5
    priority: tuple[str, ...] = DEFAULT_PRIORITY
    target_class: str = "positive"
    intrinsic_product: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.delta < 0:
            raise ContractError("delta must be non-negative")
        if self.delta_scope not in ("all", "neutral"):
            raise ContractError(f"unknown delta scope {self.delta_scope!r}")
        if self.mode not in ("deterministic", "stochastic"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.neighbourhood not in ("training", "local", "local_weighted"):
            raise ContractError(f"unknown neighbourhood {self.neighbourhood!r}")
        if self.target_class not in ("positive", "negative", "predicted"):
            raise ContractError(f"unknown target class {self.target_class!r}")
        if self.votes < 1:
            raise ContractError("votes must be at least 1")

    def updated(self, **changes) -> "Config":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name == "priority":
        return tuple(p.strip() for p in raw.replace(",", " ").split() if p.strip())
    if name == "intrinsic_product":
        return raw.lower() in ("1", "true", "yes", "on")
    if name in ("votes", "lime_samples", "pi_repeats", "seed"):
        return int(raw)
    if name == "shap_coalitions":
        return None if raw.lower() in ("", "auto", "none") else int(raw)
    if name == "kernel_width":
        return None if raw.lower() in ("", "auto", "none") else float(raw)
    if name in ("delta", "zeta", "ridge"):
        return float(raw)
    return raw


def parse_config(text: str, base: Config | None = None) -> Config:
    parser = configparser.ConfigParser(delimiters=("=",), interpolation=None, inline_comment_prefixes=("#",))
    parser.read_string("[config]\n" + text)
    known = {f.name for f in fields(Config)}
    values = {}
    for key, raw in parser["config"].items():
        key = key.replace("-", "_")
        if key not in known:
            raise ContractError(f"unknown config key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ContractError(f"bad value for {key!r}: {raw!r}") from exc
    return replace(base or Config(), **values)


def load_config(path: str | Path | None = None) -> Config:
    """Config from ``path``, else ``$FITRUTH_CONFIG``, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    return parse_config(Path(path).read_text(encoding="utf-8"))
