"""Tunable parameters shared by the pipeline and the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

ACDC_LABELS = {0: "background", 1: "RV", 2: "myocardium", 3: "LV"}
CLASSES = ("background", "RV", "myocardium", "LV")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentConfig:
    bins: int = 256
    bandwidth: int = 14
    window_n: int = 35
    r_min_frac: float = 0.05
    r_max_frac: float = 0.45
    min_score_fraction: float = 0.25
    min_area_frac: float = 0.01
    fallback_fraction: float = 0.4
    apd_mode: str = "symmetric"
    label_map: dict = field(default_factory=lambda: dict(ACDC_LABELS))

    def __post_init__(self):
        if self.bins < 8:
            raise ConfigError("bins must be >= 8")
        if not 1 <= self.bandwidth < self.bins / 2:
            raise ConfigError("bandwidth must lie in [1, bins/2)")
        if self.window_n < 3 or self.bins <= 2 * self.window_n:
            raise ConfigError("window_n must be >= 3 and below bins/2")
        if not 0 < self.r_min_frac < self.r_max_frac <= 0.5:
            raise ConfigError("need 0 < r_min_frac < r_max_frac <= 0.5")
        if not 0 < self.min_score_fraction <= 1:
            raise ConfigError("min_score_fraction must lie in (0, 1]")
        if not 0 <= self.min_area_frac < 1:
            raise ConfigError("min_area_frac must lie in [0, 1)")
        if not 0 < self.fallback_fraction <= 1:
            raise ConfigError("fallback_fraction must lie in (0, 1]")
        if self.apd_mode not in ("symmetric", "directed"):
            raise ConfigError("apd_mode must be 'symmetric' or 'directed'")
        labels = {int(k): str(v) for k, v in self.label_map.items()}
        unknown = set(labels.values()) - set(CLASSES)
        if unknown:
            raise ConfigError(f"unknown classes in label_map: {sorted(unknown)}")
        if len(set(labels.values())) != len(labels):
            raise ConfigError("label_map assigns one class to several labels")
        if "LV" not in labels.values():
            raise ConfigError("label_map must contain the LV class")
        object.__setattr__(self, "label_map", labels)

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SegmentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label_map"] = {str(k): v for k, v in self.label_map.items()}
        return d
