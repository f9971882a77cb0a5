"""Schedule bookkeeping shared by both schedulers and the simulator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

from .errors import ScheduleError
from .workload import Job


@dataclass
class JobSchedule:
    """Per-job scheduling outcome: start/end are planning times (dur_est)."""

    scheduled: bool = False
    start: Optional[int] = None
    end: Optional[int] = None
    rejected: bool = False  # request can never fit the facility (nodes > N)


@dataclass
class ScheduleState:
    entries: Dict[int, JobSchedule] = field(default_factory=dict)

    @classmethod
    def for_jobs(cls, jobs: Iterable[Job]) -> "ScheduleState":
        return cls({job.id: JobSchedule() for job in jobs})

    def commit(self, job: Job, start: int) -> None:
        entry = self.entries[job.id]
        if entry.scheduled:
            raise ScheduleError(f"job {job.id} committed twice (start {entry.start} -> {start})")
        entry.scheduled = True
        entry.start = start
        entry.end = start + job.dur_est

    def clear(self, job_id: int) -> None:
        self.entries[job_id] = JobSchedule()

    def reject(self, job_id: int) -> None:
        self.entries[job_id] = JobSchedule(rejected=True)

    def is_scheduled(self, job_id: int) -> bool:
        return self.entries[job_id].scheduled

    def start_of(self, job_id: int) -> Optional[int]:
        return self.entries[job_id].start
