"""Pipeline configuration: TOML files, schema validation, effective defaults."""
from __future__ import annotations

import dataclasses
import sys
import types
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .augment import AUGMENTERS, AugmentConfig, TransformConfig
from .bayesnet import BnOptions
from .classify import CLASSIFIERS, CnnConfig, GbdtConfig, PipelineSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSource:
    n_major: int = 900
    n_minor: int = 100
    d: int = 64
    separation: float = 2.5


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"  # "synthetic", "csv" or "madelon"
    path: str = ""
    name: str = ""
    label_column: str = "label"
    missing_token: str = ""
    max_missing_per_feature: int = -1  # < 0 keeps every feature
    minority_fraction: float = 0.0  # > 0 removes minority rows down to this share
    remove_minority: int = 0  # exact count of class-1 rows to drop instead
    synthetic: SyntheticSource = field(default_factory=SyntheticSource)

    def display_name(self) -> str:
        if self.name:
            return self.name
        if self.source == "synthetic":
            return "synthetic"
        return Path(self.path).stem or self.source


@dataclass(frozen=True)
class BnConfig:
    enabled: bool = False
    options: BnOptions = field(default_factory=BnOptions)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out: str = "riga_out"
    folds: int = 5
    workers: int = 1
    classifier: str = "gbdt"
    grid_search: bool = False
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    cnn: CnnConfig = field(default_factory=CnnConfig)
    bn: BnConfig = field(default_factory=BnConfig)

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}")
        if self.augment.kind not in AUGMENTERS:
            raise ConfigError(f"augmenter must be one of {AUGMENTERS}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.dataset.source not in ("synthetic", "csv", "madelon"):
            raise ConfigError(f"unknown dataset source {self.dataset.source!r}")
        if self.dataset.source != "synthetic" and not self.dataset.path:
            raise ConfigError(f"dataset source {self.dataset.source!r} needs a path")
        if self.grid_search and self.classifier != "cnn":
            raise ConfigError("grid_search applies to the cnn classifier only")
        # every augmenter emits tabular rows, which the cnn path re-renders
        # through the fold's pixel mapping, so all pairs are valid

    def pipeline_spec(self) -> PipelineSpec:
        return PipelineSpec(self.classifier, self.augment, self.transform, self.gbdt, self.cnn, self.seed)


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def _coerce(tp, value, where: str):
    origin = typing.get_origin(tp)
    if is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a table")
        return build(tp, value, where)
    if origin is typing.Union or origin is types.UnionType:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, where)
    if tp is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected an array")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def build(cls, table: dict, where: str = ""):
    """Instantiate dataclass ``cls`` from a nested dict, rejecting unknown keys."""
    hints = _hints(cls)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where or 'top level'}]: {', '.join(unknown)}")
    kwargs = {}
    for key, value in table.items():
        path = f"{where}.{key}" if where else key
        kwargs[key] = _coerce(hints[key], value, path)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where or 'top level'}] {exc}") from None


def load_config(path) -> PipelineConfig:
    with open(path, "rb") as fh:
        try:
            table = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return build(PipelineConfig, table)


def with_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Apply CLI flags (None means not given)."""
    top, dataset, augment, transform = {}, {}, {}, {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "dataset":
            if value == "synthetic":
                dataset["source"] = "synthetic"
            elif value.startswith("madelon:"):
                dataset.update(source="madelon", path=value.split(":", 1)[1])
            else:
                dataset.update(source="csv", path=value)
        elif key == "augmenter":
            augment["kind"] = value
        elif key == "grid_size":
            transform["grid_size"] = value
        else:
            top[key] = value
    try:
        return replace(
            cfg,
            dataset=replace(cfg.dataset, **dataset),
            augment=replace(cfg.augment, **augment),
            transform=replace(cfg.transform, **transform),
            **top,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot render {v!r}")


def to_toml(table: dict, prefix: str = "") -> str:
    """Render a nested dict as TOML; None values are written as comments."""
    scalars, tables = [], []
    for key, value in table.items():
        if isinstance(value, dict):
            tables.append((key, value))
        elif value is None:
            scalars.append(f"# {key} = (unset)")
        else:
            scalars.append(f"{key} = {_toml_value(value)}")
    out = []
    if prefix and scalars:
        out.append(f"[{prefix}]")
    out.extend(scalars)
    for key, value in tables:
        sub = to_toml(value, f"{prefix}.{key}" if prefix else key)
        if sub:
            out.append("")
            out.append(sub)
    return "\n".join(out)


def explain(cfg: PipelineConfig) -> str:
    return "# effective configuration\n" + to_toml(config_dict(cfg)) + "\n"
