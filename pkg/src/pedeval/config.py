"""Run configuration: the request schema shared by the CLI and the service.

The config file is JSON with the same shape as :class:`RunConfig`.  Labels
may be given by name (resolved through the legend) or directly as
integers.  Every resolved value is echoed into the reports so results stay
attributable to the exact thresholds and class sets that produced them.
"""

from __future__ import annotations

import json

from pydantic import BaseModel, Field, ValidationError, field_validator

from .categorize import CategorizerConfig
from .errors import ConfigError
from .labels import (CITYSCAPES_LABELS, DEFAULT_OCCLUDER_NAMES,
                     DEFAULT_PEDESTRIAN_NAME)
from .metrics import DEFAULT_MR_FLOOR, FPPI_REFS


class LabelsSection(BaseModel):
    legend: dict[str, int] = Field(default_factory=lambda: dict(CITYSCAPES_LABELS))
    pedestrian: str | int = DEFAULT_PEDESTRIAN_NAME
    occluders: list[str | int] = Field(
        default_factory=lambda: list(DEFAULT_OCCLUDER_NAMES))
    instance_id_encoding: str = "cityscapes"

    @field_validator("instance_id_encoding")
    @classmethod
    def _encoding(cls, v):
        if v not in ("cityscapes", "raw"):
            raise ValueError("instance_id_encoding must be 'cityscapes' or 'raw'")
        return v

    def resolve(self, value: str | int, what: str) -> int:
        if isinstance(value, int):
            return value
        if value not in self.legend:
            raise ConfigError(f"{what} {value!r} is not in the label legend")
        return self.legend[value]

    def pedestrian_id(self) -> int:
        return self.resolve(self.pedestrian, "pedestrian class")

    def occluder_ids(self) -> frozenset[int]:
        return frozenset(self.resolve(v, "occluder class")
                         for v in self.occluders)


class CategorizerSection(BaseModel):
    occlusion_visibility: float = 0.6    # candidate gate on own-instance share
    environment_coverage: float = 0.7
    crowd_share: float = 0.5
    ambiguity_factor: float = 0.75
    foreground_height_px: int = 190

    @field_validator("occlusion_visibility", "environment_coverage",
                     "crowd_share", "ambiguity_factor")
    @classmethod
    def _unit_open(cls, v, info):
        if not (0.0 < v < 1.0):
            raise ValueError(f"{info.field_name} must lie in (0, 1)")
        return v

    @field_validator("foreground_height_px")
    @classmethod
    def _positive(cls, v):
        if v <= 0:
            raise ValueError("foreground_height_px must be positive")
        return v


class MatcherSection(BaseModel):
    ignore_iom: bool = False        # intersection-over-min for ignore regions
    literal_ambiguity: bool = False


class FpSection(BaseModel):
    center_offset: float = 0.2
    proximity_iou: float = 0.25

    @field_validator("center_offset")
    @classmethod
    def _offset(cls, v):
        if v <= 0:
            raise ValueError("center_offset must be positive")
        return v

    @field_validator("proximity_iou")
    @classmethod
    def _iou(cls, v):
        if not (0.0 < v < 1.0):
            raise ValueError("proximity_iou must lie in (0, 1)")
        return v


class MetricsSection(BaseModel):
    c_min: float = 0.01
    miss_rate_floor: float = DEFAULT_MR_FLOOR
    fppi_refs: list[float] = Field(default_factory=lambda: list(FPPI_REFS))

    @field_validator("c_min")
    @classmethod
    def _c_min(cls, v):
        if not (0.0 < v < 1.0):
            raise ValueError("c_min must lie in (0, 1)")
        return v

    @field_validator("miss_rate_floor")
    @classmethod
    def _floor(cls, v):
        if not (0.0 < v <= 1.0):
            raise ValueError("miss_rate_floor must lie in (0, 1]")
        return v

    @field_validator("fppi_refs")
    @classmethod
    def _refs(cls, v):
        if not v or any(r <= 0 for r in v):
            raise ValueError("fppi_refs must be a non-empty list of positive rates")
        return v


class ReasonableSection(BaseModel):
    min_height: int = 50
    min_visibility: float = 0.65


class RunConfig(BaseModel):
    ground_truth: str
    detections: str
    mask_dir: str
    output_dir: str = "pedeval-out"
    output_formats: list[str] = Field(default_factory=lambda: ["json", "csv"])
    labels: LabelsSection = Field(default_factory=LabelsSection)
    categorizer: CategorizerSection = Field(default_factory=CategorizerSection)
    matcher: MatcherSection = Field(default_factory=MatcherSection)
    fp: FpSection = Field(default_factory=FpSection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)
    reasonable: ReasonableSection = Field(default_factory=ReasonableSection)

    @field_validator("output_formats")
    @classmethod
    def _formats(cls, v):
        bad = set(v) - {"json", "csv"}
        if bad:
            raise ValueError(f"unknown output formats: {sorted(bad)}")
        if not v:
            raise ValueError("output_formats must not be empty")
        return v

    def categorizer_config(self) -> CategorizerConfig:
        return CategorizerConfig(
            occlusion_threshold=self.categorizer.occlusion_visibility,
            env_threshold=self.categorizer.environment_coverage,
            crowd_threshold=self.categorizer.crowd_share,
            ambiguity_factor=self.categorizer.ambiguity_factor,
            foreground_height=self.categorizer.foreground_height_px,
            occluder_classes=self.labels.occluder_ids(),
            pedestrian_class=self.labels.pedestrian_id(),
            instance_id_encoding=self.labels.instance_id_encoding,
            literal_ambiguity=self.matcher.literal_ambiguity,
        )

    def echo(self) -> dict:
        """Fully resolved view of the configuration, for report provenance."""
        return {
            "ground_truth": self.ground_truth,
            "detections": self.detections,
            "mask_dir": self.mask_dir,
            "labels": {
                "pedestrian_class": self.labels.pedestrian_id(),
                "occluder_classes": sorted(self.labels.occluder_ids()),
                "instance_id_encoding": self.labels.instance_id_encoding,
            },
            "categorizer": {
                "occlusion_visibility": self.categorizer.occlusion_visibility,
                "environment_coverage": self.categorizer.environment_coverage,
                "crowd_share": self.categorizer.crowd_share,
                "ambiguity_factor": self.categorizer.ambiguity_factor,
                "foreground_height_px": self.categorizer.foreground_height_px,
            },
            "matcher": {
                "ignore_iom": self.matcher.ignore_iom,
                "literal_ambiguity": self.matcher.literal_ambiguity,
            },
            "fp": {
                "center_offset": self.fp.center_offset,
                "proximity_iou": self.fp.proximity_iou,
            },
            "metrics": {
                "c_min": self.metrics.c_min,
                "miss_rate_floor": self.metrics.miss_rate_floor,
                "fppi_refs": list(self.metrics.fppi_refs),
            },
            "reasonable": {
                "min_height": self.reasonable.min_height,
                "min_visibility": self.reasonable.min_visibility,
            },
        }


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror or e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path}:{e.lineno}: {e.msg}")
    return parse_config(doc)


def parse_config(doc: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}")
