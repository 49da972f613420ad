"""Experiment configuration: one flat record driving trace generation,
replay, and the timing model, with JSON round-trip for batch runs."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .perf import ComputeModel, DramModel, SimResult, simulate, stats_row
from .replay import SCHEMES

_PAYLOAD_MODES = ("fast", "real", "verify")


@dataclass
class ExperimentConfig:
    workload: str = "micro"
    scheme: str = "mgx"
    channels: int = 1
    cache_kb: int = 4
    region_mb: int = 128
    tree_arity: int = 8
    mac_granularity: int = 1024
    seed: int = 0
    payload_mode: str = "fast"
    debug_ledger: bool = True
    background_writes: bool = True
    macs_per_cycle: float = 2048.0
    bytes_per_cycle_per_channel: float = 8.0
    fixed_latency: float = 100.0
    out: str | None = None
    workload_args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.payload_mode not in _PAYLOAD_MODES:
            raise ConfigError(
                f"unknown payload mode {self.payload_mode!r}; expected one of {_PAYLOAD_MODES}"
            )
        if self.channels < 1:
            raise ConfigError("channels must be at least 1")
        if self.cache_kb < 1:
            raise ConfigError("cache_kb must be at least 1")
        if self.region_mb < 1:
            raise ConfigError("region_mb must be at least 1")
        if self.mac_granularity < 1:
            raise ConfigError("mac_granularity must be at least 1 byte")
        if not isinstance(self.workload_args, dict):
            raise ConfigError("workload_args must be a JSON object")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data)

    def to_json(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def with_overrides(self, **kv) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in kv.items() if v is not None})

    # -- model builders -----------------------------------------------------

    def dram_model(self) -> DramModel:
        return DramModel(
            channels=self.channels,
            bytes_per_cycle_per_channel=self.bytes_per_cycle_per_channel,
            fixed_latency=self.fixed_latency,
            background_writes=self.background_writes,
        )

    def compute_model(self) -> ComputeModel:
        return ComputeModel(macs_per_cycle=self.macs_per_cycle)

    def build_trace(self):
        from .workloads import build_trace

        return build_trace(
            self.workload,
            seed=self.seed,
            mac_granularity=self.mac_granularity,
            args=self.workload_args,
        )


def run_experiment(cfg: ExperimentConfig, trace=None, hooks=None) -> SimResult:
    """Build the trace (unless given), replay it, and evaluate the models.

    Tamper rejections and verify-mode payload mismatches propagate as their
    exceptions; a rejection carries the partial stats gathered before it.
    """
    if trace is None:
        trace = cfg.build_trace()
    return simulate(
        trace,
        cfg.scheme,
        cfg.dram_model(),
        cfg.compute_model(),
        payload_mode=cfg.payload_mode,
        hooks=hooks,
        region_mb=cfg.region_mb,
        cache_kb=cfg.cache_kb,
        tree_arity=cfg.tree_arity,
        debug_ledger=cfg.debug_ledger,
    )


def sweep_experiment(cfg: ExperimentConfig, param: str, values: list) -> list[dict]:
    """Run the experiment once per value of `param` and return stats rows.

    `param` may name any config field or, failing that, a workload argument.
    """
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    rows = []
    for v in values:
        if param in fields:
            sub = dataclasses.replace(cfg, **{param: v})
        else:
            args = dict(cfg.workload_args)
            args[param] = v
            sub = dataclasses.replace(cfg, workload_args=args)
        sim = run_experiment(sub)
        rows.append(stats_row(sim, param, v))
    return rows
