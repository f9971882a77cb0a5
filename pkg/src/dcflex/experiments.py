"""Experiment orchestration: scenarios, sweeps, and result persistence.

A scenario runs the configured schedulers under both the flat and the
peak price signal for every seed, writing one directory per run:

    out/
      manifest.json                 scenario configuration (flat key=value map)
      seed<k>/jobs.csv              generated workload
      seed<k>/<sched>_<price>/timeseries.csv
      seed<k>/<sched>_<price>/summary.json
      seed<k>/milp_<price>/windows.csv
      comparison.csv                per-run metrics plus peak flexibility

Sweeps repeat a scenario along one axis (peak_multiplier, num_jobs,
util_mode or gpu_mode) and aggregate seed-averaged peak-period metrics
into sweep.csv. Everything except solver timing columns is byte-stable
for a fixed configuration and seed.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import pricing, sim
from .backfill import fifo_schedule
from .errors import ConfigurationError
from .facility import DataCenterConfig
from .rolling import RollingResult, rolling_horizon
from .schedule import ScheduleState
from .sim import Interval, Metrics, SimulationResult
from .workload import (
    GpuFixed,
    GpuInverseWeighted,
    GpuMode,
    GpuPoisson,
    Job,
    UtilFixed,
    UtilMode,
    UtilNormal,
    WorkloadSpec,
    generate_workload,
    write_jobs_csv,
)

SCHEDULERS = ("fifo", "milp")
PRICE_MODES = ("flat", "peak")


@dataclass(frozen=True)
class PriceConfig:
    base: float = 0.45
    peak_start: int = 60
    peak_duration: int = 1
    peak_multiplier: float = 3.0

    def signals(self, horizon: int) -> Dict[str, pricing.PriceSignal]:
        base = pricing.flat(self.base, horizon)
        return {
            "flat": base,
            "peak": pricing.with_peak(
                base, self.peak_start, self.peak_duration, self.peak_multiplier
            ),
        }

    @property
    def peak_interval(self) -> Interval:
        return (self.peak_start, self.peak_start + self.peak_duration)


@dataclass(frozen=True)
class ScenarioConfig:
    workload: WorkloadSpec = WorkloadSpec()
    facility: DataCenterConfig = DataCenterConfig()
    price: PriceConfig = PriceConfig()
    scheduler: str = "both"  # fifo | milp | both
    window_h: int = 24
    horizon: int = 120
    seeds: Tuple[int, ...] = (1,)

    def validate(self) -> "ScenarioConfig":
        self.facility.validate()
        if self.scheduler not in ("fifo", "milp", "both"):
            raise ConfigurationError(f"scheduler must be fifo, milp or both, got {self.scheduler}")
        if self.horizon < 1 or self.window_h < 1:
            raise ConfigurationError("horizon and window_h must be >= 1")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.price.peak_start < 0 or (
            self.price.peak_start + self.price.peak_duration > self.horizon
        ):
            raise ConfigurationError("peak window must lie inside the horizon")
        return self

    @property
    def schedulers(self) -> Tuple[str, ...]:
        return SCHEDULERS if self.scheduler == "both" else (self.scheduler,)

    @property
    def analysis_interval(self) -> Interval:
        return sim.analysis_interval(self.horizon, self.window_h)


@dataclass(frozen=True)
class SweepSpec:
    axis: str  # peak_multiplier | num_jobs | util_mode | gpu_mode
    values: Tuple[str, ...]
    base: ScenarioConfig

    def validate(self) -> "SweepSpec":
        if self.axis not in ("peak_multiplier", "num_jobs", "util_mode", "gpu_mode"):
            raise ConfigurationError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise ConfigurationError("sweep needs at least one axis value")
        for value in self.values:
            apply_axis_value(self.base, self.axis, value)  # raises on bad values
        return self


@dataclass
class RunRecord:
    seed: int
    scheduler: str
    price_mode: str
    metrics_all: Metrics
    metrics_peak: Metrics
    flexibility_kw: Optional[float] = None  # peak runs only
    result: Optional[SimulationResult] = None
    rolling: Optional[RollingResult] = None


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    records: List[RunRecord] = field(default_factory=list)
    out_dir: Optional[Path] = None

    def record(self, seed: int, scheduler: str, price_mode: str) -> RunRecord:
        for rec in self.records:
            if (rec.seed, rec.scheduler, rec.price_mode) == (seed, scheduler, price_mode):
                return rec
        raise KeyError((seed, scheduler, price_mode))


# --- mode string forms (config files, sweep axis values) -------------------

def parse_util_mode(text: str) -> UtilMode:
    kind, _, args = text.strip().partition(":")
    try:
        if kind == "fixed":
            return UtilFixed(float(args))
        if kind == "normal":
            mean, sd = (float(p) for p in args.split(","))
            return UtilNormal(mean, sd)
    except (ValueError, TypeError) as err:
        raise ConfigurationError(f"bad util_mode {text!r}: {err}") from None
    raise ConfigurationError(f"util_mode must be fixed:<v> or normal:<mean>,<sd>, got {text!r}")


def format_util_mode(mode: UtilMode) -> str:
    if isinstance(mode, UtilFixed):
        return f"fixed:{mode.value:g}"
    return f"normal:{mode.mean:g},{mode.sd:g}"


def parse_gpu_mode(text: str) -> GpuMode:
    kind, _, args = text.strip().partition(":")
    try:
        if kind == "fixed":
            return GpuFixed(int(args))
        if kind == "poisson":
            return GpuPoisson(float(args))
        if kind == "invweight":
            if ".." in args:
                lo, hi = (int(p) for p in args.split(".."))
                support = tuple(range(lo, hi + 1))
            else:
                support = tuple(int(p) for p in args.split(","))
            return GpuInverseWeighted(support)
    except (ValueError, TypeError) as err:
        raise ConfigurationError(f"bad gpu_mode {text!r}: {err}") from None
    raise ConfigurationError(
        f"gpu_mode must be fixed:<k>, poisson:<mean> or invweight:<set>, got {text!r}"
    )


def format_gpu_mode(mode: GpuMode) -> str:
    if isinstance(mode, GpuFixed):
        return f"fixed:{mode.count}"
    if isinstance(mode, GpuPoisson):
        return f"poisson:{mode.mean:g}"
    support = sorted(mode.support)
    if support == list(range(support[0], support[-1] + 1)) and len(support) > 2:
        return f"invweight:{support[0]}..{support[-1]}"
    return "invweight:" + ",".join(str(g) for g in support)


# --- flat configuration mapping ---------------------------------------------

_DEFAULTS = ScenarioConfig()

CONFIG_KEYS = {
    "horizon_h", "window_h", "seeds", "scheduler", "out",
    "nodes", "gpus_per_node", "node_max_kw", "node_idle_kw", "cooling_alpha",
    "gpu_hour_price", "max_wait_h",
    "num_jobs", "arrival_span_h", "duration_mean_h", "duration_sd_h",
    "duration_max_h", "util_mode", "gpu_mode", "early_term_fraction",
    "price_base", "peak_start_h", "peak_duration_h", "peak_multiplier",
    "sweep_axis", "sweep_values",
}


def load_config_file(path) -> Dict[str, str]:
    """Flat `key = value` text file; '#' starts a comment."""
    mapping: Dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read config file {path}: {err}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        mapping[key] = value.strip()
    return mapping


def scenario_from_mapping(mapping: Dict[str, str]) -> ScenarioConfig:
    def get(key, cast, default):
        if key not in mapping:
            return default
        try:
            return cast(mapping[key])
        except (ValueError, TypeError) as err:
            raise ConfigurationError(f"bad value for {key}: {mapping[key]!r} ({err})") from None

    def parse_seeds(text: str) -> Tuple[int, ...]:
        return tuple(int(p) for p in text.split(",") if p.strip())

    workload = WorkloadSpec(
        num_jobs=get("num_jobs", int, _DEFAULTS.workload.num_jobs),
        arrival_span=get("arrival_span_h", int, _DEFAULTS.workload.arrival_span),
        duration_mean=get("duration_mean_h", float, _DEFAULTS.workload.duration_mean),
        duration_sd=get("duration_sd_h", float, _DEFAULTS.workload.duration_sd),
        duration_max=get("duration_max_h", int, _DEFAULTS.workload.duration_max),
        util_mode=get("util_mode", parse_util_mode, _DEFAULTS.workload.util_mode),
        gpu_mode=get("gpu_mode", parse_gpu_mode, _DEFAULTS.workload.gpu_mode),
        early_term_fraction=get(
            "early_term_fraction", float, _DEFAULTS.workload.early_term_fraction
        ),
    )
    facility = DataCenterConfig(
        num_nodes=get("nodes", int, _DEFAULTS.facility.num_nodes),
        gpus_per_node=get("gpus_per_node", int, _DEFAULTS.facility.gpus_per_node),
        node_max_kw=get("node_max_kw", float, _DEFAULTS.facility.node_max_kw),
        node_idle_kw=get("node_idle_kw", float, _DEFAULTS.facility.node_idle_kw),
        cooling_alpha=get("cooling_alpha", float, _DEFAULTS.facility.cooling_alpha),
        gpu_hour_price=get("gpu_hour_price", float, _DEFAULTS.facility.gpu_hour_price),
        max_wait_h=get("max_wait_h", int, _DEFAULTS.facility.max_wait_h),
    )
    price = PriceConfig(
        base=get("price_base", float, _DEFAULTS.price.base),
        peak_start=get("peak_start_h", int, _DEFAULTS.price.peak_start),
        peak_duration=get("peak_duration_h", int, _DEFAULTS.price.peak_duration),
        peak_multiplier=get("peak_multiplier", float, _DEFAULTS.price.peak_multiplier),
    )
    return ScenarioConfig(
        workload=workload,
        facility=facility,
        price=price,
        scheduler=get("scheduler", str, _DEFAULTS.scheduler),
        window_h=get("window_h", int, _DEFAULTS.window_h),
        horizon=get("horizon_h", int, _DEFAULTS.horizon),
        seeds=get("seeds", parse_seeds, _DEFAULTS.seeds),
    ).validate()


def scenario_to_mapping(cfg: ScenarioConfig) -> Dict[str, str]:
    w, f, p = cfg.workload, cfg.facility, cfg.price
    return {
        "horizon_h": str(cfg.horizon),
        "window_h": str(cfg.window_h),
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "scheduler": cfg.scheduler,
        "nodes": str(f.num_nodes),
        "gpus_per_node": str(f.gpus_per_node),
        "node_max_kw": f"{f.node_max_kw:g}",
        "node_idle_kw": f"{f.node_idle_kw:g}",
        "cooling_alpha": f"{f.cooling_alpha:g}",
        "gpu_hour_price": f"{f.gpu_hour_price:g}",
        "max_wait_h": str(f.max_wait_h),
        "num_jobs": str(w.num_jobs),
        "arrival_span_h": str(w.arrival_span),
        "duration_mean_h": f"{w.duration_mean:g}",
        "duration_sd_h": f"{w.duration_sd:g}",
        "duration_max_h": str(w.duration_max),
        "util_mode": format_util_mode(w.util_mode),
        "gpu_mode": format_gpu_mode(w.gpu_mode),
        "early_term_fraction": f"{w.early_term_fraction:g}",
        "price_base": f"{p.base:g}",
        "peak_start_h": str(p.peak_start),
        "peak_duration_h": str(p.peak_duration),
        "peak_multiplier": f"{p.peak_multiplier:g}",
    }


def apply_axis_value(base: ScenarioConfig, axis: str, value: str) -> ScenarioConfig:
    if axis == "peak_multiplier":
        try:
            mult = float(value)
        except ValueError:
            raise ConfigurationError(f"bad peak multiplier {value!r}") from None
        return replace(base, price=replace(base.price, peak_multiplier=mult))
    if axis == "num_jobs":
        try:
            count = int(value)
        except ValueError:
            raise ConfigurationError(f"bad job count {value!r}") from None
        if count < 0:
            raise ConfigurationError(f"num_jobs must be >= 0, got {count}")
        return replace(base, workload=replace(base.workload, num_jobs=count))
    if axis == "util_mode":
        return replace(base, workload=replace(base.workload, util_mode=parse_util_mode(value)))
    if axis == "gpu_mode":
        return replace(base, workload=replace(base.workload, gpu_mode=parse_gpu_mode(value)))
    raise ConfigurationError(f"unknown sweep axis {axis!r}")


# --- execution ---------------------------------------------------------------

def _schedule_for(
    scheduler: str,
    jobs: Sequence[Job],
    cfg: ScenarioConfig,
    prices: pricing.PriceSignal,
    dump_dir=None,
) -> Tuple[ScheduleState, Optional[RollingResult]]:
    if scheduler == "fifo":
        return fifo_schedule(jobs, cfg.facility, cfg.horizon), None
    rolled = rolling_horizon(jobs, cfg.facility, prices, cfg.window_h, dump_dir=dump_dir)
    return rolled.schedule, rolled


def _metrics_json(metrics: Metrics) -> Dict:
    return {
        "avg_power_kw": round(metrics.avg_power_kw, 2),
        "gpu_util": round(metrics.gpu_util, 4),
        "node_occupancy": round(metrics.node_occupancy, 4),
        "avg_wait_h": round(metrics.avg_wait_h, 2),
        "revenue_usd": round(metrics.revenue_usd, 2),
        "interval": list(metrics.interval),
    }


def _write_summary(rec: RunRecord, path: Path) -> None:
    doc = {
        "seed": rec.seed,
        "scheduler": rec.scheduler,
        "price_mode": rec.price_mode,
        "metrics": {
            "all": _metrics_json(rec.metrics_all),
            "peak": _metrics_json(rec.metrics_peak),
        },
    }
    if rec.flexibility_kw is not None:
        doc["flexibility_kw"] = round(rec.flexibility_kw, 2)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_windows_csv(rolled: RollingResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "solve_ms", "objective", "vars", "constraints", "status"])
        for diag in rolled.windows:
            writer.writerow(
                [diag.index, f"{diag.solve_ms:.1f}", f"{diag.objective:.2f}",
                 diag.num_vars, diag.num_constraints, diag.status]
            )


COMPARISON_HEADER = [
    "seed", "scheduler", "price", "interval", "avg_power_kw", "gpu_util",
    "node_occupancy", "avg_wait_h", "revenue_usd", "flexibility_kw",
]


def _comparison_rows(outcome: ScenarioResult) -> List[List[str]]:
    rows = []
    for seed in outcome.config.seeds:
        for scheduler in outcome.config.schedulers:
            # the persisted flexibility is the difference of the persisted
            # (2-decimal) powers, so re-aggregation reproduces it exactly
            flat_power = round(outcome.record(seed, scheduler, "flat").metrics_peak.avg_power_kw, 2)
            peak_power = round(outcome.record(seed, scheduler, "peak").metrics_peak.avg_power_kw, 2)
            for mode in PRICE_MODES:
                rec = outcome.record(seed, scheduler, mode)
                for name, metrics in (("all", rec.metrics_all), ("peak", rec.metrics_peak)):
                    flex = ""
                    if mode == "peak" and name == "peak":
                        flex = f"{flat_power - peak_power:.2f}"
                    rows.append(
                        [str(seed), scheduler, mode, name,
                         f"{metrics.avg_power_kw:.2f}", f"{metrics.gpu_util:.4f}",
                         f"{metrics.node_occupancy:.4f}", f"{metrics.avg_wait_h:.2f}",
                         f"{metrics.revenue_usd:.2f}", flex]
                    )
    return rows


def run_scenario(cfg: ScenarioConfig, out_dir, dump_lp=None) -> ScenarioResult:
    """Run the scenario and persist all artifacts under out_dir."""
    cfg.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(
            json.dumps(scenario_to_mapping(cfg), indent=2, sort_keys=True) + "\n"
        )
    except OSError as err:
        raise OSError(f"cannot write to output directory {out}: {err}") from err

    outcome = ScenarioResult(cfg, out_dir=out)
    interval_all = cfg.analysis_interval
    interval_peak = cfg.price.peak_interval
    signals = cfg.price.signals(cfg.horizon)

    for seed in cfg.seeds:
        seed_dir = out / f"seed{seed:03d}"
        seed_dir.mkdir(exist_ok=True)
        jobs = generate_workload(
            replace(cfg.workload, seed=seed), cfg.facility.gpus_per_node
        )
        write_jobs_csv(jobs, seed_dir / "jobs.csv")
        for scheduler in cfg.schedulers:
            per_mode: Dict[str, RunRecord] = {}
            for mode in PRICE_MODES:
                run_dir = seed_dir / f"{scheduler}_{mode}"
                run_dir.mkdir(exist_ok=True)
                dump_dir = None
                if dump_lp is not None and scheduler == "milp":
                    dump_dir = Path(dump_lp) / f"seed{seed:03d}_{mode}"
                    dump_dir.mkdir(parents=True, exist_ok=True)
                prices = signals[mode]
                schedule, rolled = _schedule_for(scheduler, jobs, cfg, prices, dump_dir)
                result = sim.run(jobs, schedule, cfg.facility, prices)
                rec = RunRecord(
                    seed,
                    scheduler,
                    mode,
                    sim.metrics(result, interval_all, jobs),
                    sim.metrics(result, interval_peak, jobs),
                    result=result,
                    rolling=rolled,
                )
                sim.write_timeseries_csv(result, run_dir / "timeseries.csv")
                if rolled is not None:
                    _write_windows_csv(rolled, run_dir / "windows.csv")
                per_mode[mode] = rec
                outcome.records.append(rec)
            per_mode["peak"].flexibility_kw = sim.flexibility(
                per_mode["peak"].result, per_mode["flat"].result, interval_peak
            )
            for mode in PRICE_MODES:
                _write_summary(per_mode[mode], seed_dir / f"{scheduler}_{mode}" / "summary.json")

    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_HEADER)
        writer.writerows(_comparison_rows(outcome))
    return outcome


SWEEP_HEADER = [
    "axis_value", "scheduler", "peak_avg_power_kw", "gpu_util", "occupancy",
    "revenue", "pct_power_reduction_vs_fifo",
]


def _sweep_rows(axis_value: str, outcome: ScenarioResult) -> List[List[str]]:
    cfg = outcome.config
    means: Dict[str, Dict[str, float]] = {}
    for scheduler in cfg.schedulers:
        recs = [outcome.record(seed, scheduler, "peak") for seed in cfg.seeds]
        means[scheduler] = {
            "power": sum(r.metrics_peak.avg_power_kw for r in recs) / len(recs),
            "util": sum(r.metrics_peak.gpu_util for r in recs) / len(recs),
            "occ": sum(r.metrics_peak.node_occupancy for r in recs) / len(recs),
            "rev": sum(r.metrics_peak.revenue_usd for r in recs) / len(recs),
        }
    rows = []
    for scheduler in cfg.schedulers:
        m = means[scheduler]
        if "fifo" in means and means["fifo"]["power"] > 0:
            pct = 100.0 * (means["fifo"]["power"] - m["power"]) / means["fifo"]["power"]
        else:
            pct = 0.0
        rows.append(
            [axis_value, scheduler, f"{m['power']:.2f}", f"{m['util']:.4f}",
             f"{m['occ']:.4f}", f"{m['rev']:.2f}", f"{pct:.2f}"]
        )
    return rows


def _axis_dir_name(axis: str, value: str) -> str:
    safe = value.replace(":", "_").replace(",", "_").replace("..", "-")
    return f"{axis}={safe}"


def run_sweep(sweep: SweepSpec, out_dir, threads: Optional[int] = None) -> List[List[str]]:
    """One scenario per axis value; returns the aggregated sweep rows."""
    sweep.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(
            {
                "sweep_axis": sweep.axis,
                "sweep_values": list(sweep.values),
                "base": scenario_to_mapping(sweep.base),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    if threads is None:
        threads = max(1, int(os.environ.get("DCFLEX_THREADS", "1")))

    def one(value: str) -> Tuple[str, ScenarioResult]:
        cfg = apply_axis_value(sweep.base, sweep.axis, value)
        return value, run_scenario(cfg, out / _axis_dir_name(sweep.axis, value))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, sweep.values))
    else:
        outcomes = [one(v) for v in sweep.values]

    rows: List[List[str]] = []
    for value, outcome in outcomes:
        rows.extend(_sweep_rows(value, outcome))
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    return rows


# --- re-aggregation from persisted artifacts ---------------------------------

def _metrics_from_json(doc: Dict) -> Metrics:
    return Metrics(
        avg_power_kw=doc["avg_power_kw"],
        gpu_util=doc["gpu_util"],
        node_occupancy=doc["node_occupancy"],
        avg_wait_h=doc["avg_wait_h"],
        revenue_usd=doc["revenue_usd"],
        interval=tuple(doc["interval"]),
    )


def _load_scenario_outcome(out: Path) -> ScenarioResult:
    cfg = scenario_from_mapping(json.loads((out / "manifest.json").read_text()))
    outcome = ScenarioResult(cfg, out_dir=out)
    for seed in cfg.seeds:
        for scheduler in cfg.schedulers:
            per_mode = {}
            for mode in PRICE_MODES:
                doc = json.loads(
                    (out / f"seed{seed:03d}" / f"{scheduler}_{mode}" / "summary.json").read_text()
                )
                rec = RunRecord(
                    seed, scheduler, mode,
                    _metrics_from_json(doc["metrics"]["all"]),
                    _metrics_from_json(doc["metrics"]["peak"]),
                )
                per_mode[mode] = rec
                outcome.records.append(rec)
            per_mode["peak"].flexibility_kw = (
                per_mode["flat"].metrics_peak.avg_power_kw
                - per_mode["peak"].metrics_peak.avg_power_kw
            )
    return outcome


def report(out_dir) -> None:
    """Rebuild comparison.csv (and sweep.csv for sweep directories) from
    the summary files already on disk."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ConfigurationError(f"no manifest.json under {out}; nothing to re-aggregate")
    manifest = json.loads(manifest_path.read_text())
    if "sweep_axis" in manifest:
        axis = manifest["sweep_axis"]
        rows: List[List[str]] = []
        for value in manifest["sweep_values"]:
            outcome = _load_scenario_outcome(out / _axis_dir_name(axis, value))
            rows.extend(_sweep_rows(value, outcome))
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_HEADER)
            writer.writerows(rows)
        return
    outcome = _load_scenario_outcome(out)
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_HEADER)
        writer.writerows(_comparison_rows(outcome))
