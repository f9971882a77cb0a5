"""FIFO scheduling with conservative backfilling.

Jobs are processed in arrival order (ties broken by id) and each receives
a reservation on a node-capacity timeline as it is processed. A later job
may start before an earlier one only by fitting into gaps left by existing
reservations, so no earlier-arriving job is ever delayed.

`fifo_backfill` is the pure planning routine over estimated durations.
`fifo_schedule` layers the simulation coupling on top: whenever a running
job terminates earlier than its estimate, all not-yet-started jobs are
re-planned at the termination timestep against the freed capacity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .facility import DataCenterConfig
from .schedule import ScheduleState
from .workload import Job


@dataclass
class CapacityTimeline:
    """Free node count per timestep over the planning horizon."""

    free_nodes: np.ndarray

    @classmethod
    def empty(cls, num_nodes: int, horizon: int) -> "CapacityTimeline":
        return cls(np.full(horizon, num_nodes, dtype=int))

    @property
    def horizon(self) -> int:
        return int(self.free_nodes.size)

    def earliest_start(self, min_start: int, nodes: int, duration: int) -> Optional[int]:
        """Smallest start >= min_start with `nodes` free for `duration` steps.

        Returns None when no start fits before the end of the horizon.
        """
        horizon = self.horizon
        if min_start + duration > horizon:
            return None
        ok = self.free_nodes >= nodes
        counts = np.cumsum(ok)
        # number of feasible steps in [s, s+duration)
        window = counts[duration - 1 :] - np.concatenate(([0], counts[:-duration]))
        candidates = np.flatnonzero(window[min_start:] == duration)
        if candidates.size == 0:
            return None
        return int(min_start + candidates[0])

    def reserve(self, start: int, nodes: int, duration: int) -> None:
        end = min(start + duration, self.horizon)
        self.free_nodes[start:end] -= nodes
        if np.any(self.free_nodes[start:end] < 0):
            raise AssertionError("timeline oversubscribed; reservation bookkeeping broken")


def _fifo_order(jobs: Sequence[Job]) -> List[Job]:
    return sorted(jobs, key=lambda j: (j.arrival, j.id))


def _plan(
    jobs: Sequence[Job],
    state: ScheduleState,
    cfg: DataCenterConfig,
    horizon: int,
    now: int,
) -> None:
    """(Re-)reserve all jobs not yet started at `now`, in FIFO order.

    Jobs already started keep their reservation, projected over dur_est;
    a job whose actual termination is already visible (ended at or before
    `now`) holds no capacity from `now` on.
    """
    timeline = CapacityTimeline.empty(cfg.num_nodes, horizon)
    movable: List[Job] = []
    for job in _fifo_order(jobs):
        entry = state.entries[job.id]
        if entry.rejected:
            continue
        if entry.scheduled and entry.start < now:
            if entry.start + job.dur_act <= now:
                continue  # already finished, capacity free
            timeline.reserve(entry.start, job.nodes, job.dur_est)
        else:
            if entry.scheduled:
                state.clear(job.id)
            movable.append(job)
    for job in movable:
        start = timeline.earliest_start(max(job.arrival, now), job.nodes, job.dur_est)
        if start is not None:
            state.commit(job, start)
            timeline.reserve(start, job.nodes, job.dur_est)


def fifo_backfill(jobs: Sequence[Job], cfg: DataCenterConfig, horizon: int) -> ScheduleState:
    """Plan every job at its earliest no-delay start using estimated durations.

    Jobs that cannot finish by the end of the horizon stay unscheduled;
    jobs requesting more nodes than the facility owns are rejected.
    """
    state = ScheduleState.for_jobs(jobs)
    for job in jobs:
        if job.nodes > cfg.num_nodes:
            state.reject(job.id)
    _plan(jobs, state, cfg, horizon, now=0)
    return state


def fifo_schedule(jobs: Sequence[Job], cfg: DataCenterConfig, horizon: int) -> ScheduleState:
    """fifo_backfill plus re-planning at every observed early termination."""
    state = fifo_backfill(jobs, cfg, horizon)
    by_id: Dict[int, Job] = {job.id: job for job in jobs}
    seen = set()
    while True:
        events = [
            (entry.start + by_id[jid].dur_act, jid)
            for jid, entry in state.entries.items()
            if entry.scheduled
            and by_id[jid].dur_act < by_id[jid].dur_est
            and (jid, entry.start + by_id[jid].dur_act) not in seen
        ]
        if not events:
            return state
        when, jid = min(events)
        seen.add((jid, when))
        if when >= horizon:
            continue
        _plan(jobs, state, cfg, horizon, now=when)
