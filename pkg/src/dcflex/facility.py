"""Data-center constants and the power/cost model.

Power accounting convention: every node draws its idle power at every
timestep whether or not it hosts a job, so scheduling decisions influence
cost only through the active-GPU term. This is what makes occupancy
reduction during price peaks the dominant flexibility mechanism.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

from .errors import ConfigurationError


@dataclass(frozen=True)
class DataCenterConfig:
    """Facility constants. Defaults describe a 100-node, 4-GPU-per-node center."""

    num_nodes: int = 100
    gpus_per_node: int = 4
    node_max_kw: float = 3.0
    node_idle_kw: float = 0.9
    cooling_alpha: float = 0.4
    gpu_hour_price: float = 2.30
    max_wait_h: int = 30

    def validate(self) -> "DataCenterConfig":
        if self.num_nodes < 1:
            raise ConfigurationError(f"num_nodes must be >= 1, got {self.num_nodes}")
        if self.gpus_per_node < 1:
            raise ConfigurationError(
                f"gpus_per_node must be >= 1, got {self.gpus_per_node}"
            )
        if not self.node_max_kw > self.node_idle_kw > 0:
            raise ConfigurationError(
                "node power must satisfy max > idle > 0, got "
                f"max={self.node_max_kw} idle={self.node_idle_kw}"
            )
        if self.cooling_alpha < 0:
            raise ConfigurationError(f"cooling_alpha must be >= 0, got {self.cooling_alpha}")
        if self.max_wait_h < 0:
            raise ConfigurationError(f"max_wait_h must be >= 0, got {self.max_wait_h}")
        return self


def gpu_active_power(cfg: DataCenterConfig) -> float:
    """Active power draw per GPU in kW: (node max - node idle) / GPUs per node."""
    if cfg.gpus_per_node == 0:
        raise ConfigurationError("gpus_per_node must be nonzero")
    return (cfg.node_max_kw - cfg.node_idle_kw) / cfg.gpus_per_node


def total_power(active_jobs: Iterable[Tuple[int, float]], cfg: DataCenterConfig) -> float:
    """Facility power in kW for a set of running jobs given as (gpus, util) pairs.

    Idle power is charged for all nodes regardless of occupancy; each active
    job adds gpus * util * per-GPU active power.
    """
    p_gpu = gpu_active_power(cfg)
    active = sum(g * u for g, u in active_jobs)
    return cfg.node_idle_kw * cfg.num_nodes + active * p_gpu


def energy_cost(power_kw: float, price: float, alpha: float, dt_h: float = 1.0) -> float:
    """Electricity cost in dollars, with cooling overhead folded in as (1 + alpha)."""
    if dt_h <= 0:
        raise ConfigurationError(f"dt_h must be positive, got {dt_h}")
    return (1.0 + alpha) * price * power_kw * dt_h
