"""Experiment configuration: defaults, TOML files, and flag overrides.

Config files are TOML with up to three sections, [pretrain], [downstream],
and [eval], whose keys mirror the corresponding dataclass fields. Values
given on the command line win over the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .downstream import DownstreamConfig
from .errors import ParseError
from .pretrain import PretrainConfig


@dataclass(frozen=True)
class EvalSettings:
    ks: tuple[int, ...] = (10, 25)
    folds: int = 5
    seed: int = 0
    model: str = "mlp"

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValueError("ks must be positive cutoffs")
        if self.model not in ("mlp", "aggregated_scorer"):
            raise ValueError(f"unknown downstream model {self.model!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    pretrain: PretrainConfig = PretrainConfig()
    downstream: DownstreamConfig = DownstreamConfig()
    eval: EvalSettings = EvalSettings()


def _updated(instance, section: str, values: dict):
    valid = {f.name: f for f in dataclasses.fields(instance)}
    for key, value in values.items():
        if key not in valid:
            raise ParseError(f"unknown key {key!r} in [{section}] section")
    if "ks" in values:
        values = {**values, "ks": tuple(int(k) for k in values["ks"])}
    return dataclasses.replace(instance, **values)


def load_config(path: str | None) -> ExperimentConfig:
    """Read a TOML config file; a missing path yields pure defaults."""
    config = ExperimentConfig()
    if path is None:
        return config
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    known = {"pretrain", "downstream", "eval"}
    unknown = set(data) - known
    if unknown:
        raise ParseError(f"{path}: unknown section(s) {sorted(unknown)}")
    return ExperimentConfig(
        pretrain=_updated(config.pretrain, "pretrain", data.get("pretrain", {})),
        downstream=_updated(config.downstream, "downstream", data.get("downstream", {})),
        eval=_updated(config.eval, "eval", data.get("eval", {})),
    )


def apply_overrides(config: ExperimentConfig, **sections) -> ExperimentConfig:
    """Overlay non-None flag values; section kwargs are dicts of field values."""
    updated = {}
    for section in ("pretrain", "downstream", "eval"):
        overrides = {
            k: v for k, v in sections.get(section, {}).items() if v is not None
        }
        updated[section] = _updated(getattr(config, section), section, overrides)
    return ExperimentConfig(**updated)
