"""Per-timestep electricity price series with optional peak events.

Peak events are assumed known in advance (day-ahead style), so a price
signal is a plain precomputed series with no uncertainty model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class PriceSignal:
    """Electricity price in $/kWh, one entry per simulation timestep."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ConfigurationError("price series must be a non-empty 1-D sequence")
        if not np.all(arr > 0):
            raise ConfigurationError("all price entries must be positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, tau):
        return float(self.values[tau])


def flat(base: float, horizon: int) -> PriceSignal:
    """Constant price series of the given length."""
    if base <= 0:
        raise ConfigurationError(f"base price must be positive, got {base}")
    if horizon < 1:
        raise ConfigurationError(f"horizon must be >= 1, got {horizon}")
    return PriceSignal(np.full(horizon, base, dtype=float))


def with_peak(base: PriceSignal, start: int, duration: int, multiplier: float) -> PriceSignal:
    """Return a copy of the series with [start, start+duration) scaled by multiplier."""
    if multiplier <= 0:
        raise ConfigurationError(f"multiplier must be positive, got {multiplier}")
    if duration < 0:
        raise ConfigurationError(f"duration must be >= 0, got {duration}")
    if start < 0 or start + duration > len(base):
        raise ConfigurationError(
            f"peak window [{start},{start + duration}) outside series of length {len(base)}"
        )
    values = base.values.copy()
    values[start : start + duration] *= multiplier
    return PriceSignal(values)
