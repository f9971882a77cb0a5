import numpy as np
import pytest

from dcflex import (
    DataCenterConfig,
    InfeasibleWindowError,
    ScheduleState,
    WindowProblem,
    active_start_set,
    brute_force,
    build_window_model,
    commit_solution,
    flat,
    rolling_horizon,
    solve,
    with_peak,
)
from dcflex.errors import ScheduleError
from dcflex.rolling import continues_at
from dcflex.workload import Job


def make_job(jid, arrival, gpus, dur, util=1.0, dur_act=None, gpus_per_node=4):
    nodes = -(-gpus // gpus_per_node)
    return Job(jid, arrival, dur, dur_act if dur_act is not None else dur, gpus, nodes, util)


def test_active_start_set_unit_duration():
    job = make_job(0, 0, 4, 1)
    assert active_start_set(job, 5, (0, 23)) == {5}


def test_active_start_set_window_of_durations():
    job = make_job(0, 0, 4, 3)
    assert active_start_set(job, 5, (0, 23)) == {3, 4, 5}


def test_active_start_set_arrival_bound():
    job = make_job(0, 5, 4, 3)
    assert active_start_set(job, 5, (0, 23)) == {5}


def test_zero_variable_window_constant():
    cfg = DataCenterConfig()
    prices = flat(0.45, 48)
    jobs = [make_job(0, 0, 8, 10)]
    state = ScheduleState.for_jobs(jobs)
    state.commit(jobs[0], 0)  # running since window 0
    problem = WindowProblem(24, 47, jobs, state, prices, cfg)
    model = build_window_model(problem)
    assert model.instance.num_variables == 0
    # continuing power negative offset: 24 h of idle (90 kW) minus nothing
    # (the job ends at t=10, before this window)
    expected = -sum(1.4 * 0.45 * 90.0 for _ in range(24))
    assert model.instance.offset == pytest.approx(expected)


def test_zero_variable_window_with_continuing_job():
    cfg = DataCenterConfig()
    prices = flat(0.45, 48)
    jobs = [make_job(0, 0, 8, 30, util=0.5)]
    state = ScheduleState.for_jobs(jobs)
    state.commit(jobs[0], 0)
    problem = WindowProblem(24, 47, jobs, state, prices, cfg)
    model = build_window_model(problem)
    assert model.instance.num_variables == 0
    # job continues through [24,30): 6 hours of 8*0.5*0.525 kW on top of idle
    cont_kw = 8 * 0.5 * 0.525
    expected = -(1.4 * 0.45 * (90.0 * 24 + cont_kw * 6))
    assert model.instance.offset == pytest.approx(expected)


def test_cheap_hour_preferred():
    cfg = DataCenterConfig()
    prices = with_peak(flat(0.45, 2), 1, 1, 3.0)
    jobs = [make_job(0, 0, 4, 1, util=1.0)]
    state = ScheduleState.for_jobs(jobs)
    model = build_window_model(WindowProblem(0, 1, jobs, state, prices, cfg))
    res = solve(model.instance, rel_gap=0.0, abs_gap=0.0)
    started = [(jid, tau) for i, (jid, tau) in enumerate(model.variables) if tau >= 0 and res.value_of(i)]
    assert started == [(0, 0)]  # 1.4*0.45*2.1 = 1.323 beats 1.4*1.35*2.1 = 3.969


def test_deadline_forcing_at_arrival():
    cfg = DataCenterConfig(max_wait_h=0)
    prices = flat(0.45, 24)
    jobs = [make_job(0, 3, 4, 2)]
    state = ScheduleState.for_jobs(jobs)
    model = build_window_model(WindowProblem(0, 23, jobs, state, prices, cfg))
    assert model.forced_ids == [0]
    res = solve(model.instance, rel_gap=0.0)
    started = [(jid, tau) for i, (jid, tau) in enumerate(model.variables) if tau >= 0 and res.value_of(i)]
    assert started == [(0, 3)]


def test_oversized_forced_job_is_infeasible():
    cfg = DataCenterConfig(num_nodes=2, max_wait_h=1)
    prices = flat(0.45, 24)
    jobs = [make_job(0, 0, 40, 2)]  # 10 nodes needed, 2 exist
    state = ScheduleState.for_jobs(jobs)
    with pytest.raises(InfeasibleWindowError):
        build_window_model(WindowProblem(0, 23, jobs, state, prices, cfg))


def test_commit_solution():
    jobs = [make_job(0, 0, 4, 10), make_job(1, 0, 4, 5)]
    state = ScheduleState.for_jobs(jobs)
    commit_solution(state, [])
    assert not state.entries[0].scheduled
    commit_solution(state, [(jobs[0], 30), (jobs[1], 2)])
    assert state.entries[0].start == 30 and state.entries[0].end == 40
    assert state.entries[1].start == 2 and state.entries[1].end == 7
    with pytest.raises(ScheduleError):
        commit_solution(state, [(jobs[0], 31)])


def test_window_bounds():
    cfg = DataCenterConfig(num_nodes=1000)
    jobs = [make_job(0, 0, 4, 2)]
    result = rolling_horizon(jobs, cfg, flat(0.45, 120), 24)
    bounds = [(d.t_start, d.t_end) for d in result.windows]
    assert bounds == [(0, 23), (24, 47), (48, 71), (72, 95), (96, 119)]


def test_single_window_equals_static_solve():
    cfg = DataCenterConfig(num_nodes=20)
    rng = np.random.default_rng(4)
    jobs = [
        make_job(i, int(rng.integers(0, 10)), int(rng.integers(1, 12)), int(rng.integers(1, 6)))
        for i in range(6)
    ]
    prices = with_peak(flat(0.45, 24), 12, 4, 5.0)
    rolled = rolling_horizon(jobs, cfg, prices, 24, abs_gap=0.0)
    assert len(rolled.windows) == 1
    state = ScheduleState.for_jobs(jobs)
    model = build_window_model(WindowProblem(0, 23, jobs, state, prices, cfg))
    res = solve(model.instance, abs_gap=0.0)
    static = {jid: tau for i, (jid, tau) in enumerate(model.variables) if tau >= 0 and res.value_of(i)}
    for job in jobs:
        assert rolled.schedule.entries[job.id].start == static.get(job.id)


def test_continuation_condition():
    job = make_job(0, 10, 4, 10)
    state = ScheduleState.for_jobs([job])
    state.commit(job, 20)
    # scheduled at 20 with dur 10: occupies [20, 30)
    assert [tau for tau in range(24, 48) if continues_at(job, state.entries[0], 24, tau)] == list(range(24, 30))
    # early termination frees capacity at the actual end
    early = make_job(0, 10, 4, 10, dur_act=7)
    state = ScheduleState.for_jobs([early])
    state.commit(early, 20)
    assert [tau for tau in range(24, 48) if continues_at(early, state.entries[0], 24, tau)] == list(range(24, 27))


def test_continuing_job_consumes_capacity():
    cfg = DataCenterConfig(num_nodes=2)
    long_job = make_job(0, 0, 8, 30)  # 2 nodes for 30 h
    late_job = make_job(1, 25, 4, 2)
    result = rolling_horizon([long_job, late_job], cfg, flat(0.45, 60), 24)
    assert result.schedule.entries[0].start == 0
    assert result.schedule.entries[1].start == 30  # blocked until the long job ends


def _small_problem(rng, cfg, horizon):
    n_jobs = int(rng.integers(1, 5))
    jobs = []
    for i in range(n_jobs):
        dur = int(rng.integers(1, 5))
        arrival = int(rng.integers(0, max(1, horizon - dur)))
        jobs.append(make_job(i, arrival, int(rng.integers(1, 9)), dur, util=float(rng.uniform(0.05, 1.0))))
    prices = flat(0.45, horizon)
    if rng.random() < 0.7:
        start = int(rng.integers(0, horizon))
        prices = with_peak(prices, start, int(rng.integers(1, horizon - start + 1)), float(rng.choice([3, 30, 300])))
    return jobs, prices


def test_oracle_equivalence_small_windows():
    # single-window instances small enough for exhaustive enumeration
    rng = np.random.default_rng(31)
    cfg = DataCenterConfig(num_nodes=3, max_wait_h=4)
    compared = 0
    while compared < 40:
        horizon = int(rng.integers(2, 9))
        jobs, prices = _small_problem(rng, cfg, horizon)
        state = ScheduleState.for_jobs(jobs)
        model = build_window_model(WindowProblem(0, horizon - 1, jobs, state, prices, cfg))
        if not 0 < model.instance.num_variables <= 20:
            continue
        exact = brute_force(model.instance)
        approx = solve(model.instance, rel_gap=0.0, abs_gap=0.0)
        assert approx.status == exact.status
        if exact.status == "optimal":
            assert approx.objective_value == pytest.approx(exact.objective_value, abs=1e-6)
        compared += 1


def test_flat_prices_abundant_capacity_start_at_arrival():
    cfg = DataCenterConfig(num_nodes=10_000)
    rng = np.random.default_rng(8)
    jobs = [
        make_job(i, int(rng.integers(0, 50)), int(rng.integers(1, 64)), int(rng.integers(1, 12)))
        for i in range(25)
    ]
    result = rolling_horizon(jobs, cfg, flat(0.45, 120), 24)
    for job in jobs:
        assert result.schedule.entries[job.id].start == job.arrival


def test_peak_avoidance_direction():
    # a single job's committed start never moves INTO the peak as the
    # multiplier grows
    cfg = DataCenterConfig(num_nodes=100)
    job = make_job(0, 2, 8, 4)
    overlaps = []
    for mult in (1.0, 3.0, 10.0, 100.0, 300.0):
        prices = with_peak(flat(0.45, 24), 4, 2, mult) if mult > 1 else flat(0.45, 24)
        result = rolling_horizon([job], cfg, prices, 24)
        start = result.schedule.entries[0].start
        run = set(range(start, start + job.dur_est))
        overlaps.append(len(run & {4, 5}))
    assert all(b <= a for a, b in zip(overlaps, overlaps[1:]))


def test_constraint_audit_on_solution():
    # solved windows satisfy at-most-one-start and capacity arithmetic
    cfg = DataCenterConfig(num_nodes=5)
    rng = np.random.default_rng(77)
    jobs = [
        make_job(i, int(rng.integers(0, 30)), int(rng.integers(1, 16)), int(rng.integers(1, 10)))
        for i in range(15)
    ]
    result = rolling_horizon(jobs, cfg, flat(0.45, 48), 24)  # audits run internally
    usage = np.zeros(48, dtype=int)
    for job in jobs:
        entry = result.schedule.entries[job.id]
        if entry.scheduled:
            assert entry.start >= job.arrival
            usage[entry.start : entry.start + job.dur_est] += job.nodes
    assert usage.max() <= 5


def test_dump_lp_writes_window_files(tmp_path):
    cfg = DataCenterConfig(num_nodes=50)
    jobs = [make_job(0, 0, 4, 3), make_job(1, 30, 8, 2)]
    rolling_horizon(jobs, cfg, flat(0.45, 48), 24, dump_dir=tmp_path)
    assert (tmp_path / "window_0.lp").exists()
    assert (tmp_path / "window_1.lp").exists()
