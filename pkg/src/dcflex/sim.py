"""Hour-by-hour replay of a committed schedule, with metrics and flexibility.

The replay is the ground truth: jobs run for their *actual* duration, so
early terminations drop power back to the idle floor before the planned
end. Revenue accrues hourly at the GPU-hour price times the requested
GPUs of running jobs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import CapacityViolationError
from .facility import DataCenterConfig, gpu_active_power
from .pricing import PriceSignal
from .schedule import JobSchedule, ScheduleState
from .workload import Job

Interval = Tuple[int, int]  # half-open [start, end)


@dataclass
class SimulationResult:
    power_kw: np.ndarray
    occupied_nodes: np.ndarray
    active_gpus: np.ndarray
    gpu_util: np.ndarray  # per-step active-power fraction of GPUs in occupied nodes
    prices: np.ndarray
    revenue_h: np.ndarray
    schedule: ScheduleState
    cfg: DataCenterConfig

    @property
    def horizon(self) -> int:
        return int(self.power_kw.size)


@dataclass(frozen=True)
class Metrics:
    avg_power_kw: float
    gpu_util: float
    node_occupancy: float
    avg_wait_h: float
    revenue_usd: float
    interval: Interval


def run(
    jobs: Sequence[Job],
    schedule: ScheduleState,
    cfg: DataCenterConfig,
    prices: PriceSignal,
) -> SimulationResult:
    """Execute the schedule over the price horizon."""
    horizon = len(prices)
    occupied = np.zeros(horizon, dtype=int)
    gpus = np.zeros(horizon, dtype=int)
    gpu_load = np.zeros(horizon)  # sum of gpus * util over running jobs
    revenue = np.zeros(horizon)

    final = ScheduleState()
    for job in jobs:
        entry = schedule.entries[job.id]
        if not entry.scheduled:
            final.entries[job.id] = JobSchedule(rejected=entry.rejected)
            continue
        start = entry.start
        stop = min(start + job.dur_act, horizon)
        occupied[start:stop] += job.nodes
        gpus[start:stop] += job.gpus
        gpu_load[start:stop] += job.gpus * job.util
        revenue[start:stop] += cfg.gpu_hour_price * job.gpus
        final.entries[job.id] = JobSchedule(True, start, start + job.dur_act)

    over = np.flatnonzero(occupied > cfg.num_nodes)
    if over.size:
        raise CapacityViolationError(
            f"{occupied[over[0]]} nodes required at t={int(over[0])}, "
            f"capacity is {cfg.num_nodes}"
        )

    power = cfg.node_idle_kw * cfg.num_nodes + gpu_load * gpu_active_power(cfg)
    util = np.zeros(horizon)
    busy = occupied > 0
    util[busy] = gpu_load[busy] / (cfg.gpus_per_node * occupied[busy])
    return SimulationResult(
        power, occupied, gpus, util, prices.values.copy(), revenue, final, cfg
    )


def _check_interval(res: SimulationResult, interval: Interval) -> None:
    a, b = interval
    if not (0 <= a < b <= res.horizon):
        raise ValueError(f"empty or out-of-range interval {interval} for horizon {res.horizon}")


def metrics(res: SimulationResult, interval: Interval, jobs: Sequence[Job]) -> Metrics:
    """Aggregate over [a, b): mean power/occupancy, utilization over busy
    steps, wait of jobs starting inside the interval, accrued revenue."""
    _check_interval(res, interval)
    a, b = interval
    occupied = res.occupied_nodes[a:b]
    busy = occupied > 0
    util = float(np.mean(res.gpu_util[a:b][busy])) if busy.any() else 0.0

    waits = [
        res.schedule.entries[job.id].start - job.arrival
        for job in jobs
        if res.schedule.entries[job.id].scheduled
        and a <= res.schedule.entries[job.id].start < b
    ]
    return Metrics(
        avg_power_kw=float(np.mean(res.power_kw[a:b])),
        gpu_util=util,
        node_occupancy=float(np.mean(occupied)) / res.cfg.num_nodes,
        avg_wait_h=float(np.mean(waits)) if waits else 0.0,
        revenue_usd=float(np.sum(res.revenue_h[a:b])),
        interval=interval,
    )


def flexibility(dynamic: SimulationResult, flat: SimulationResult, interval: Interval) -> float:
    """Average power shed during the interval relative to the flat-price run.

    Positive values mean the dynamic-price schedule reduced demand.
    """
    if dynamic.horizon != flat.horizon:
        raise ValueError(
            f"horizon mismatch: {dynamic.horizon} vs {flat.horizon}"
        )
    _check_interval(dynamic, interval)
    a, b = interval
    return float(np.mean(flat.power_kw[a:b]) - np.mean(dynamic.power_kw[a:b]))


def analysis_interval(horizon: int, window_h: int) -> Interval:
    """Core reporting interval: drop the first and last rolling window to
    avoid boundary effects, unless fewer than three windows exist."""
    n_windows = (horizon - 1) // window_h + 1
    if n_windows < 3:
        return (0, horizon)
    return (window_h, (n_windows - 1) * window_h)


TIMESERIES_HEADER = ["t", "power_kw", "occupied_nodes", "active_gpus", "gpu_util", "price", "revenue_h"]


def write_timeseries_csv(res: SimulationResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_HEADER)
        for t in range(res.horizon):
            writer.writerow(
                [
                    t,
                    f"{res.power_kw[t]:.2f}",
                    int(res.occupied_nodes[t]),
                    int(res.active_gpus[t]),
                    f"{res.gpu_util[t]:.4f}",
                    f"{res.prices[t]:.4f}",
                    f"{res.revenue_h[t]:.2f}",
                ]
            )


def read_timeseries_csv(path) -> dict:
    """Columns of a stored timeseries as float arrays, keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {
        key: np.array([float(r[key]) for r in rows])
        for key in (reader.fieldnames or [])
    }
