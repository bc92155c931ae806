"""Scheme parameter sets and the abstract per-op cost table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError

# Abstract cost units per primitive op. Only relative magnitudes matter;
# the table is a calibration artifact and can be overridden from JSON.
DEFAULT_COST_TABLE = {
    "encrypt": 0.0,
    "decrypt": 0.0,
    "add": 1.0,
    "mult_ct": 10.0,
    "mult_pt": 4.0,
    "rotate": 8.0,
    "bootstrap": 1000.0,
    "gate_switch": 2.0,  # per slot
    "gate_compare": 5.0,  # per slot
    "gate_unswitch": 2.0,  # per slot
}


@dataclass(frozen=True)
class SchemeParams:
    """Emulated CKKS parameter set plus the gate-domain quantization grid."""

    ring_dimension: int = 16384
    slot_count: int = 8192
    depth_after_bootstrap: int = 10
    gate_precision_bits: int = 16
    gate_range: float = 64.0
    noise_sigma: float = 0.0
    cost_table: dict = field(default_factory=lambda: dict(DEFAULT_COST_TABLE))

    def __post_init__(self):
        if self.ring_dimension <= 0 or self.ring_dimension & (self.ring_dimension - 1):
            raise ConfigError("ring_dimension must be a positive power of two")
        if self.slot_count != self.ring_dimension // 2:
            raise ConfigError("slot_count must equal ring_dimension / 2")
        if self.depth_after_bootstrap < 1:
            raise ConfigError("depth_after_bootstrap must be >= 1")
        if self.gate_precision_bits < 1:
            raise ConfigError("gate_precision_bits must be >= 1")
        if self.gate_range <= 0:
            raise ConfigError("gate_range must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        for name, cost in self.cost_table.items():
            if cost < 0:
                raise ConfigError(f"negative cost for op {name!r}")

    def cost_of(self, op: str) -> float:
        return self.cost_table.get(op, 0.0)

    @property
    def gate_scale(self) -> float:
        """Quantized units per real unit in the gate domain."""
        return 2.0 ** (self.gate_precision_bits - 1) / self.gate_range

    @property
    def gate_qmax(self) -> int:
        return 2 ** (self.gate_precision_bits - 1) - 1

    def replace(self, **kwargs) -> "SchemeParams":
        data = self.to_dict()
        data.update(kwargs)
        return SchemeParams(**data)

    def to_dict(self) -> dict:
        return {
            "ring_dimension": self.ring_dimension,
            "slot_count": self.slot_count,
            "depth_after_bootstrap": self.depth_after_bootstrap,
            "gate_precision_bits": self.gate_precision_bits,
            "gate_range": self.gate_range,
            "noise_sigma": self.noise_sigma,
            "cost_table": dict(self.cost_table),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SchemeParams":
        known = {
            "ring_dimension",
            "slot_count",
            "depth_after_bootstrap",
            "gate_precision_bits",
            "gate_range",
            "noise_sigma",
            "cost_table",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown parameter fields: {sorted(unknown)}")
        merged_costs = dict(DEFAULT_COST_TABLE)
        merged_costs.update(data.get("cost_table", {}))
        data = {k: v for k, v in data.items() if k != "cost_table"}
        return cls(cost_table=merged_costs, **data)

    @classmethod
    def from_json(cls, path) -> "SchemeParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def lenet_params(**overrides) -> SchemeParams:
    """Parameter profile used for LeNet-5 runs (ring 16384, 8192 slots)."""
    base = SchemeParams(ring_dimension=16384, slot_count=8192, depth_after_bootstrap=10)
    return base.replace(**overrides) if overrides else base


def resnet_params(**overrides) -> SchemeParams:
    """Parameter profile used for ResNet-20 runs (ring 32768, 16384 slots)."""
    base = SchemeParams(ring_dimension=32768, slot_count=16384, depth_after_bootstrap=10)
    return base.replace(**overrides) if overrides else base


PROFILES = {"lenet": lenet_params, "resnet": resnet_params}


def profile(name: str, **overrides) -> SchemeParams:
    try:
        return PROFILES[name](**overrides)
    except KeyError:
        raise ConfigError(f"unknown params profile {name!r}; choose from {sorted(PROFILES)}") from None
