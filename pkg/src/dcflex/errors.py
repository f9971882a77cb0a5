"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, infeasible scheduling windows with 3, I/O failures with 4.
"""


class ConfigurationError(ValueError):
    """Invalid configuration value (bad spec field, malformed config file)."""


class InfeasibleWindowError(RuntimeError):
    """A scheduling window has no feasible solution.

    Carries enough context to name the window and the deadline-forced jobs
    whose constraints made the model infeasible.
    """

    def __init__(self, window_index, window, forced_jobs):
        self.window_index = window_index
        self.window = window
        self.forced_jobs = list(forced_jobs)
        super().__init__(
            f"window {window_index} [{window[0]},{window[1]}] infeasible; "
            f"deadline-forced jobs: {self.forced_jobs or 'none'}"
        )


class CapacityViolationError(RuntimeError):
    """A committed schedule oversubscribed the node pool at runtime."""


class ScheduleError(RuntimeError):
    """Logic error in schedule bookkeeping, e.g. committing a job twice."""
