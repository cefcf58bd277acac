"""Pipeline configuration: defaults, flat key-value config files, digests.

Config files are a single flat table of ``key = value`` lines (TOML-style
scalars: integers, floats, booleans, quoted strings; ``#`` comments).
Precedence is built-in defaults < config file < command-line flags; the
effective config is echoed to ``run.lock`` next to each run's outputs so
artifacts stay tied to their parameters.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .augment import MAX_ANGLE_DEG, MAX_CHAIN_LEN, ZOOM_RANGE, AugmentPolicy
from .errors import ConfigError

__all__ = ["PipelineConfig", "parse_config_text", "read_config_file"]

_MAX_SEED = 2**64


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    k: int = 3
    max_iters: int = 100
    tol: float = 1e-3
    denoise_window: int = 3
    target_size: int = 299
    test_fraction: float = 0.2
    folds: int = 5
    max_angle: float = 15.0
    zoom_min: float = 1.0
    zoom_max: float = 1.3
    max_chain_len: int = 3

    def __post_init__(self) -> None:
        if not 0 <= self.seed < _MAX_SEED:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.denoise_window % 2 == 0 or self.denoise_window < 3:
            raise ConfigError(
                f"denoise_window must be an odd integer >= 3, got {self.denoise_window}"
            )
        if self.target_size < 1:
            raise ConfigError(f"target_size must be >= 1, got {self.target_size}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(
                f"test_fraction must be in (0, 1), got {self.test_fraction}"
            )
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not 0.0 < self.max_angle <= MAX_ANGLE_DEG:
            raise ConfigError(f"max_angle must be in (0, {MAX_ANGLE_DEG}]")
        if not ZOOM_RANGE[0] <= self.zoom_min <= self.zoom_max <= ZOOM_RANGE[1]:
            raise ConfigError(
                f"zoom range must satisfy {ZOOM_RANGE[0]} <= zoom_min <= zoom_max "
                f"<= {ZOOM_RANGE[1]}"
            )
        if not 1 <= self.max_chain_len <= MAX_CHAIN_LEN:
            raise ConfigError(f"max_chain_len must be 1..{MAX_CHAIN_LEN}")

    def augment_policy(self) -> AugmentPolicy:
        return AugmentPolicy(
            max_angle=self.max_angle,
            zoom_range=(self.zoom_min, self.zoom_max),
            max_chain_len=self.max_chain_len,
        )

    def to_text(self) -> str:
        """Byte-stable ``key = value`` rendering in declaration order."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {value!r}" if isinstance(value, float) else f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def replace(self, **overrides) -> "PipelineConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(overrides)
        return PipelineConfig(**values)


def _coerce(key: str, raw: str, target_type: type) -> object:
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        raw = raw[1:-1]
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is bool:
            if raw in ("true", "false"):
                return raw == "true"
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"invalid value for {key!r}: {raw!r} (expected {target_type.__name__})"
        ) from exc


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    valid = {f.name: f.type for f in fields(PipelineConfig)}
    types = {"int": int, "float": float, "bool": bool, "str": str}
    overrides: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in valid:
            raise ConfigError(
                f"line {lineno}: unknown config key {key!r} "
                f"(valid keys: {', '.join(sorted(valid))})"
            )
        overrides[key] = _coerce(key, raw, types.get(str(valid[key]), str))
    return base.replace(**overrides)


def read_config_file(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"), base)
