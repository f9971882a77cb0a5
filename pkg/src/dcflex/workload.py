"""Seed-reproducible synthetic batch-job workloads.

Small GPU requests are more frequent than large ones (probability
proportional to 1/gpus over the support set), durations are normal draws
rounded to whole hours, and a fixed fraction of jobs finishes early.
Generation is a pure function of the spec, so identical specs yield
byte-identical job lists.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from .errors import ConfigurationError

# power-of-two worker groups plus a coordinator GPU; the stranded capacity
# of the odd sizes reproduces realistic node occupancy at realistic revenue
DEFAULT_GPU_SUPPORT = (9, 17, 33, 65)


@dataclass(frozen=True)
class Job:
    """One batch workload request."""

    id: int
    arrival: int      # arrival timestep, hours
    dur_est: int      # estimated duration, hours
    dur_act: int      # actual duration, <= dur_est (strictly less when early-terminating)
    gpus: int
    nodes: int        # ceil(gpus / gpus_per_node)
    util: float       # GPU power utilization fraction in [0.05, 1.0]

    @property
    def early_terminating(self) -> bool:
        return self.dur_act < self.dur_est


@dataclass(frozen=True)
class UtilFixed:
    value: float


@dataclass(frozen=True)
class UtilNormal:
    """Normal draw clipped into [0.05, 1.0]."""

    mean: float
    sd: float


@dataclass(frozen=True)
class GpuFixed:
    count: int


@dataclass(frozen=True)
class GpuPoisson:
    """Poisson draw floored at 1."""

    mean: float


@dataclass(frozen=True)
class GpuInverseWeighted:
    """Draw from a support set with probability proportional to 1/g."""

    support: tuple


UtilMode = Union[UtilFixed, UtilNormal]
GpuMode = Union[GpuFixed, GpuPoisson, GpuInverseWeighted]

UTIL_MIN = 0.05
UTIL_MAX = 1.0


@dataclass(frozen=True)
class WorkloadSpec:
    num_jobs: int = 150
    arrival_span: int = 96
    duration_mean: float = 10.0
    duration_sd: float = 6.0
    duration_max: int = 48
    util_mode: UtilMode = UtilNormal(0.6, 0.3)
    gpu_mode: GpuMode = GpuInverseWeighted(DEFAULT_GPU_SUPPORT)
    early_term_fraction: float = 0.20
    seed: int = 0


def _validate(spec: WorkloadSpec) -> None:
    if spec.num_jobs < 0:
        raise ConfigurationError(f"num_jobs must be >= 0, got {spec.num_jobs}")
    if spec.num_jobs > 0 and spec.arrival_span < 1:
        raise ConfigurationError(f"arrival_span must be >= 1, got {spec.arrival_span}")
    if spec.duration_sd < 0:
        raise ConfigurationError(f"duration_sd must be >= 0, got {spec.duration_sd}")
    if spec.duration_max < 1:
        raise ConfigurationError(f"duration_max must be >= 1, got {spec.duration_max}")
    if not 0.0 <= spec.early_term_fraction <= 1.0:
        raise ConfigurationError(
            f"early_term_fraction must be in [0,1], got {spec.early_term_fraction}"
        )
    mode = spec.util_mode
    if isinstance(mode, UtilFixed):
        if not UTIL_MIN <= mode.value <= UTIL_MAX:
            raise ConfigurationError(f"fixed utilization must be in [0.05,1], got {mode.value}")
    elif isinstance(mode, UtilNormal):
        if mode.sd < 0:
            raise ConfigurationError(f"utilization sd must be >= 0, got {mode.sd}")
    else:
        raise ConfigurationError(f"unknown utilization mode: {mode!r}")
    gpu = spec.gpu_mode
    if isinstance(gpu, GpuFixed):
        if gpu.count < 1:
            raise ConfigurationError(f"fixed GPU count must be >= 1, got {gpu.count}")
    elif isinstance(gpu, GpuPoisson):
        if gpu.mean <= 0:
            raise ConfigurationError(f"Poisson GPU mean must be positive, got {gpu.mean}")
    elif isinstance(gpu, GpuInverseWeighted):
        if len(gpu.support) == 0:
            raise ConfigurationError("inverse-weighted GPU support set must be non-empty")
        if any(int(g) < 1 for g in gpu.support):
            raise ConfigurationError("GPU support values must be >= 1")
    else:
        raise ConfigurationError(f"unknown GPU mode: {gpu!r}")


def derive_nodes(gpus: int, gpus_per_node: int) -> int:
    """Node count needed for a GPU request; partial nodes count whole."""
    if gpus < 1 or gpus_per_node < 1:
        raise ConfigurationError(
            f"gpus and gpus_per_node must be >= 1, got {gpus}, {gpus_per_node}"
        )
    return -(-gpus // gpus_per_node)


def sample_gpu_count(mode: GpuMode, rng: np.random.Generator) -> int:
    """Draw one GPU request size from the given mode."""
    if isinstance(mode, GpuFixed):
        return mode.count
    if isinstance(mode, GpuPoisson):
        return max(1, int(rng.poisson(mode.mean)))
    if isinstance(mode, GpuInverseWeighted):
        support = sorted(int(g) for g in mode.support)
        weights = np.array([1.0 / g for g in support])
        weights /= weights.sum()
        return int(rng.choice(support, p=weights))
    raise ConfigurationError(f"unknown GPU mode: {mode!r}")


def _sample_util(mode: UtilMode, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(mode, UtilFixed):
        return np.full(n, mode.value)
    return np.clip(rng.normal(mode.mean, mode.sd, size=n), UTIL_MIN, UTIL_MAX)


def generate_workload(spec: WorkloadSpec, gpus_per_node: int = 4) -> List[Job]:
    """Generate the job list described by the spec.

    Exactly round(early_term_fraction * num_jobs) jobs are flagged as
    early-terminating, chosen among jobs long enough (dur_est >= 2) to
    finish strictly before their estimate.
    """
    _validate(spec)
    if gpus_per_node < 1:
        raise ConfigurationError(f"gpus_per_node must be >= 1, got {gpus_per_node}")
    n = spec.num_jobs
    if n == 0:
        return []

    rng = np.random.default_rng(spec.seed)
    arrivals = rng.integers(0, spec.arrival_span, size=n)
    durations = np.rint(rng.normal(spec.duration_mean, spec.duration_sd, size=n))
    durations = np.clip(durations, 1, spec.duration_max).astype(int)
    utils = _sample_util(spec.util_mode, rng, n)
    gpus = np.array([sample_gpu_count(spec.gpu_mode, rng) for _ in range(n)])

    actual = durations.copy()
    n_early = int(round(spec.early_term_fraction * n))
    eligible = np.flatnonzero(durations >= 2)
    n_early = min(n_early, eligible.size)
    if n_early > 0:
        chosen = rng.choice(eligible, size=n_early, replace=False)
        fracs = rng.uniform(0.3, 0.9, size=n_early)
        for idx, frac in zip(chosen, fracs):
            d_est = int(durations[idx])
            d_act = max(1, int(round(frac * d_est)))
            actual[idx] = min(d_act, d_est - 1)

    return [
        Job(
            id=i,
            arrival=int(arrivals[i]),
            dur_est=int(durations[i]),
            dur_act=int(actual[i]),
            gpus=int(gpus[i]),
            nodes=derive_nodes(int(gpus[i]), gpus_per_node),
            util=float(utils[i]),
        )
        for i in range(n)
    ]


JOBS_CSV_HEADER = ["id", "arrival_h", "dur_est_h", "dur_act_h", "gpus", "nodes", "util"]


def write_jobs_csv(jobs: List[Job], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(JOBS_CSV_HEADER)
        for job in jobs:
            writer.writerow(
                [job.id, job.arrival, job.dur_est, job.dur_act, job.gpus, job.nodes,
                 f"{job.util:.4f}"]
            )


def read_jobs_csv(path: Path) -> List[Job]:
    jobs = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != JOBS_CSV_HEADER:
            raise ConfigurationError(
                f"unexpected jobs.csv header {reader.fieldnames}, want {JOBS_CSV_HEADER}"
            )
        for row in reader:
            jobs.append(
                Job(
                    id=int(row["id"]),
                    arrival=int(row["arrival_h"]),
                    dur_est=int(row["dur_est_h"]),
                    dur_act=int(row["dur_act_h"]),
                    gpus=int(row["gpus"]),
                    nodes=int(row["nodes"]),
                    util=float(row["util"]),
                )
            )
    return jobs
