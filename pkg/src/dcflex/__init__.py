"""dcflex: GPU data-center scheduling and demand-flexibility simulation."""

from .backfill import CapacityTimeline, fifo_backfill, fifo_schedule
from .errors import (
    CapacityViolationError,
    ConfigurationError,
    InfeasibleWindowError,
    ScheduleError,
)
from .facility import DataCenterConfig, energy_cost, gpu_active_power, total_power
from .milp import MilpInstance, SolveResult, brute_force, solve, write_lp
from .pricing import PriceSignal, flat, with_peak
from .rolling import (
    RollingResult,
    WindowProblem,
    active_start_set,
    build_window_model,
    commit_solution,
    rolling_horizon,
)
from .schedule import JobSchedule, ScheduleState
from .sim import Metrics, SimulationResult, analysis_interval, flexibility, metrics, run
from .workload import (
    GpuFixed,
    GpuInverseWeighted,
    GpuPoisson,
    Job,
    UtilFixed,
    UtilNormal,
    WorkloadSpec,
    derive_nodes,
    generate_workload,
    sample_gpu_count,
)

__version__ = "0.1.0"
