"""
Scenario configuration: validated models for a whole link experiment, YAML loading,
dotted-path overrides and the stable config hash.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Literal

import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core_simulation.errors import ConfigError
from core_simulation.fiber_engine import AmplifierSpec, FiberSpec, Span, StepControl, build_span
from core_simulation.receiver import ReceiverSpec
from core_simulation.signal_core import is_power_of_two
from core_simulation.transmitter import TransmitterSpec
from core_simulation.wdm import ChannelPlan, FilterSpec

logger = structlog.get_logger(__name__)

METRIC_NAMES = ("q", "ber", "eye", "spectrum", "dispersion_map", "power_map")
BASE_KEY = "base"


def _default_smf() -> FiberSpec:
    return FiberSpec(length_km=39.0, attenuation_db_per_km=0.2, dispersion_ps_nm_km=18.0, gamma_per_w_km=1.3, label="SMF")


def _default_dcf() -> FiberSpec:
    return FiberSpec(length_km=17.9, attenuation_db_per_km=0.5, dispersion_ps_nm_km=-38.0, gamma_per_w_km=5.0, label="DCF")


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_bits: int = Field(1024, ge=16)
    samples_per_bit: int = Field(16, ge=4)

    @model_validator(mode="after")
    def _power_of_two_samples(self):
        if not is_power_of_two(self.n_bits * self.samples_per_bit):
            raise ValueError("n_bits x samples_per_bit must be a power of two")
        return self


class SpanConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    smf: FiberSpec = Field(default_factory=_default_smf)
    dcf: FiberSpec | None = Field(default_factory=_default_dcf)
    amplifier: AmplifierSpec | None = Field(default_factory=AmplifierSpec)

    def build(self) -> list:
        """Element list of one span; a span without DCF or EDFA simply omits them."""
        if self.dcf is not None and self.amplifier is not None:
            return list(build_span(self.smf, self.dcf, self.amplifier).elements)
        return [e for e in (self.smf, self.dcf, self.amplifier) if e is not None]

    def as_span(self) -> Span | None:
        if self.dcf is None or self.amplifier is None:
            return None
        return build_span(self.smf, self.dcf, self.amplifier)


class DemuxConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    filter: FilterSpec = Field(default_factory=FilterSpec)
    # None keeps the filter bank on the channel plan spacing
    spacing_nm: float | None = Field(None, gt=0)


class SweepDirective(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    param: str
    values: list[float] = Field(..., min_length=2)


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    spectrum_rbw_ghz: float = Field(2.5, gt=0)
    eye_amplitude_bins: int = Field(64, ge=8)
    per_km_maps: bool = True


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "scenario"
    master_seed: int = Field(1, ge=0)
    pattern_seed: int = Field(1, ge=0)
    grid: GridConfig = Field(default_factory=GridConfig)
    channel_plan: ChannelPlan = Field(default_factory=ChannelPlan)
    transmitter: TransmitterSpec = Field(default_factory=TransmitterSpec)
    span: SpanConfig = Field(default_factory=SpanConfig)
    loops: int = Field(18, ge=0)
    step_control: StepControl = Field(default_factory=StepControl)
    receiver: ReceiverSpec = Field(default_factory=ReceiverSpec)
    demux: DemuxConfig = Field(default_factory=DemuxConfig)
    metrics: list[Literal["q", "ber", "eye", "spectrum", "dispersion_map", "power_map"]] = Field(
        default_factory=lambda: list(METRIC_NAMES)
    )
    output: OutputConfig = Field(default_factory=OutputConfig)
    sweep: SweepDirective | None = None

    @field_validator("metrics")
    @classmethod
    def _unique_metrics(cls, metrics):
        return sorted(set(metrics), key=METRIC_NAMES.index)

    @model_validator(mode="after")
    def _sweep_path_exists(self):
        if self.sweep is not None:
            resolve_path(self.model_dump(), self.sweep.param)
        return self

    @model_validator(mode="after")
    def _overrides_fit_the_transmitter(self):
        for index in self.channel_plan.overrides:
            try:
                self.channel_plan.transmitter_for(index, self.transmitter)
            except ValidationError as e:
                detail = "; ".join(item["msg"] for item in e.errors())
                raise ValueError(f"channel_plan.overrides.{index}: {detail}") from None
        return self

    def wants(self, metric: str) -> bool:
        return metric in self.metrics

    def link_elements(self) -> list:
        return [element for _ in range(self.loops) for element in self.span.build()]

    @property
    def link_length_km(self) -> float:
        return sum(e.length_km for e in self.link_elements() if isinstance(e, FiberSpec))


def resolve_path(tree: dict, path: str) -> Any:
    """Value at a dotted `path` in a dumped config tree."""
    node: Any = tree
    for part in path.split("."):
        if isinstance(node, dict):
            key = int(part) if part.isdigit() and int(part) in node else part
            if key not in node:
                raise ConfigError(f"config path '{path}' does not exist (no '{part}')")
            node = node[key]
        else:
            raise ConfigError(f"config path '{path}' does not exist ('{part}' is below a scalar)")
    return node


def _set_path(tree: dict, path: str, value: Any) -> dict:
    tree = copy.deepcopy(tree)
    resolve_path(tree, path)
    node = tree
    parts = path.split(".")
    for part in parts[:-1]:
        node = node[int(part) if part.isdigit() and int(part) in node else part]
    last = parts[-1]
    node[int(last) if last.isdigit() and int(last) in node else last] = value
    return tree


def _format_validation_error(error: ValidationError, source: str) -> str:
    lines = [f"{source}: invalid scenario"]
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "\n".join(lines)


def validate_config(tree: dict, source: str = "<config>") -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(tree)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e, source)) from e


def with_overrides(config: ScenarioConfig, overrides: dict[str, Any]) -> ScenarioConfig:
    """New validated config with dotted-path overrides applied."""
    tree = config.model_dump()
    for path, value in overrides.items():
        tree = _set_path(tree, path, value)
    return validate_config(tree, source=f"{config.name} (overrides)")


def _deep_merge(base: dict, update: dict) -> dict:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _read_tree(path: Path, seen: tuple[Path, ...] = ()) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read scenario file ({e.strerror or e})") from e
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"{where}: parse error: {problem}") from e
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: scenario must be a mapping at the top level")

    base = tree.pop(BASE_KEY, None)
    if base is None:
        return tree
    base_path = (path.parent / str(base)).resolve()
    if base_path in seen:
        raise ConfigError(f"{path}: circular '{BASE_KEY}' reference to {base_path}")
    return _deep_merge(_read_tree(base_path, seen + (base_path,)), tree)


def load_config(path: str | Path) -> ScenarioConfig:
    """
    Load and validate a YAML scenario file.

    A top-level `base: other.cfg` key inherits from another scenario file (resolved
    relative to this one) and deep-merges this file over it.

    Raises:
        ConfigError: unreadable file, parse error (with line and column), or validation error
    """
    path = Path(path)
    tree = _read_tree(path.resolve(), (path.resolve(),))
    tree.setdefault("name", path.stem)
    config = validate_config(tree, source=str(path))
    logger.info("config_loaded", path=str(path), name=config.name, hash=config_hash(config)[:12])
    return config


def config_hash(config: ScenarioConfig) -> str:
    """sha256 of the canonical JSON dump; key order in the source file does not matter."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
