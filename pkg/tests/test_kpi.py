import numpy as np
import pytest

from vnfchain.config import one_bs, two_bs
from vnfchain.kpi import (
    congestion_violation,
    core_drop_rate,
    core_drop_terms,
    delay,
    mean_lengths,
    single_queue_drop_rate,
    summarize,
    superposed_drop_rate_finite,
    system_delay_one_bs,
    system_delay_two_bs,
    system_delay_two_bs_normalized,
    tandem_drop_rates,
    throughput,
)
from vnfchain.markov import SteadyState, solve_steady_state_direct
from vnfchain.pipeline import analyze
from vnfchain.simulator import SimConfig, simulate, simulate_isolated_queue
from vnfchain.subsystems import (
    CoreQueueSpec,
    SingleQueueSpec,
    SuperposedQueueSpec,
    TandemSpec,
    build_core_queue_matrix,
    build_single_queue_matrix,
    build_superposed_queue_matrix,
    build_tandem_matrix,
    single_queue_closed_form,
)

SEED = 0


def _solve(builder, spec, **kw):
    return solve_steady_state_direct(builder(spec, **kw))


# --- drop rates ---------------------------------------------------------------

def test_tandem_drops_vanish_without_arrivals():
    spec = TandemSpec(0.0, 0.4, 0.4, 3, 3)
    assert tandem_drop_rates(_solve(build_tandem_matrix, spec), spec) == (0.0, 0.0)


def test_tandem_first_drop_vanishes_with_unit_service():
    spec = TandemSpec(0.9, 1.0, 0.3, 3, 3)
    first, _ = tandem_drop_rates(_solve(build_tandem_matrix, spec), spec)
    assert first == 0.0


def test_tandem_drops_match_simulation():
    spec = TandemSpec(0.8, 0.2, 0.2, 3, 3)
    first, second = tandem_drop_rates(_solve(build_tandem_matrix, spec), spec)
    # alpha=1 routes every task through Q1 -> Q2; a unit-rate core never blocks
    cfg = one_bs(0.8, 1.0, [0.2, 0.2, 0.5, 0.5, 0.5, 1.0], [3, 3, 5, 5, 5, 50])
    sim = simulate(SimConfig(cfg, n_slots=1_000_000, seed=SEED))
    assert abs(first - sim.per_queue[1].drop_event_rate) <= 1e-2
    assert abs(second - sim.per_queue[2].drop_event_rate) <= 1e-2


def test_tandem_exact_second_drop_uses_first_service_rate():
    spec = TandemSpec(0.6, 0.7, 0.2, 2, 2)
    ss = _solve(build_tandem_matrix, spec)
    _, exact = tandem_drop_rates(ss, spec, printed=False)
    levels, phases = ss.coordinate(0), ss.coordinate(1)
    joint = ss.probs[(levels >= 1) & (phases == 2)].sum()
    assert exact == pytest.approx(0.7 * 0.8 * joint)


def test_single_drop_without_arrivals():
    spec = SingleQueueSpec(0.0, 0.5, 5)
    assert single_queue_drop_rate(_solve(build_single_queue_matrix, spec), spec) == 0.0


def test_single_drop_vanishes_for_large_buffer():
    spec = SingleQueueSpec(0.3, 0.6, 200)
    assert single_queue_drop_rate(single_queue_closed_form(spec), spec) < 1e-9


def test_single_drop_from_closed_form():
    spec = SingleQueueSpec(0.5, 0.5, 5)
    ss = single_queue_closed_form(spec)
    # cut equations: pi_1 = pi_0 * lam / (lam' mu), then ratio lam mu' / (lam' mu) = 1
    weights = np.array([1.0] + [0.5 / (0.5 * 0.5)] * 5)
    pi = weights / weights.sum()
    assert single_queue_drop_rate(ss, spec) == pytest.approx(0.5 * 0.5 * pi[5], abs=1e-14)


def test_superposed_drop_zero_cases():
    idle = SuperposedQueueSpec(0.0, 0.0, 0.5, 5)
    assert superposed_drop_rate_finite(_solve(build_superposed_queue_matrix, idle), idle) == 0.0
    fast = SuperposedQueueSpec(0.6, 0.6, 1.0, 5)
    ss = _solve(build_superposed_queue_matrix, fast)
    assert superposed_drop_rate_finite(ss, fast, printed=True) == 0.0


def test_superposed_drop_matches_simulated_task_count():
    spec = SuperposedQueueSpec(0.4, 0.4, 0.5, 5)
    analytic = superposed_drop_rate_finite(_solve(build_superposed_queue_matrix, spec), spec)
    sim = simulate_isolated_queue(spec, 1_000_000, seed=SEED)
    assert abs(analytic - sim.drop_rate) <= 1e-2


def test_superposed_printed_terms_miss_a_served_full_queue():
    spec = SuperposedQueueSpec(0.4, 0.4, 0.5, 5)
    ss = _solve(build_superposed_queue_matrix, spec)
    gap = superposed_drop_rate_finite(ss, spec) - superposed_drop_rate_finite(ss, spec, printed=True)
    assert gap == pytest.approx(0.5 * 0.16 * ss.probs[5])


def test_core_drop_without_arrivals():
    spec = CoreQueueSpec((0.0,) * 4, 0.5, 8)
    assert core_drop_rate(_solve(build_core_queue_matrix, spec), spec) == 0.0


def test_core_drop_without_mass_near_the_top():
    spec = CoreQueueSpec((0.3,) * 4, 0.5, 8)
    probs = np.zeros(9)
    probs[:5] = 0.2
    ss = SteadyState(probs, tuple(range(9)))
    assert core_drop_rate(ss, spec) == 0.0
    assert set(core_drop_terms(ss, spec)) == {0, 1, 2, 3}


def test_core_drop_matches_simulated_task_count():
    spec = CoreQueueSpec((0.4,) * 4, 0.5, 12)
    analytic = core_drop_rate(_solve(build_core_queue_matrix, spec), spec)
    sim = simulate_isolated_queue(spec, 1_000_000, seed=SEED, service="binomial")
    assert abs(analytic - sim.drop_rate) <= 2e-2


# --- lengths and throughput ------------------------------------------------------

def test_mean_length_corners():
    assert mean_lengths(SteadyState(np.array([1.0, 0, 0]), (0, 1, 2))) == (0.0,)
    assert mean_lengths(SteadyState(np.array([0, 0, 1.0]), (0, 1, 2))) == (2.0,)


def test_mean_lengths_reordered_sum():
    spec = TandemSpec(0.45, 0.5, 0.55, 4, 3)
    ss = _solve(build_tandem_matrix, spec)
    first, second = mean_lengths(ss)
    grid = ss.probs.reshape(5, 4)
    assert first == pytest.approx(sum(i * grid[i, :].sum() for i in range(5)[::-1]), abs=1e-14)
    assert second == pytest.approx(sum(j * grid[:, j].sum() for j in range(4)[::-1]), abs=1e-14)


def test_throughput_arithmetic():
    assert throughput(0.3, 0.05) == pytest.approx(0.25)
    assert throughput(0.42, 0.0) == 0.42


def test_pipeline_throughput_matches_simulated_delivery():
    cfg = one_bs(0.8, 0.5, [0.5] * 5 + [1.0], [10] * 5 + [100])
    sim = simulate(SimConfig(cfg, n_slots=1_000_000, seed=SEED))
    assert abs(analyze(cfg).system_throughput - sim.delivered_rate) <= 1e-2


# --- delay ---------------------------------------------------------------------

def test_delay_arithmetic():
    assert delay(2, 0.4, 0.5) == pytest.approx(7.0)
    assert delay(0, 0.3, 0.5) == pytest.approx(2.0)
    assert delay(1.0, 0.0, 0.5) is None


def test_delay_against_timestamped_sojourn():
    spec = SingleQueueSpec(0.3, 0.6, 20)
    ss = single_queue_closed_form(spec)
    (length,) = mean_lengths(ss)
    t = throughput(spec.lam, single_queue_drop_rate(ss, spec))
    sim = simulate_isolated_queue(SuperposedQueueSpec(0.3, 0.0, 0.6, 20), 1_000_000, seed=SEED)
    # Little's law alone already covers the service slot; the extra 1/mu is on top of it
    assert abs(length / t - sim.mean_sojourn) / sim.mean_sojourn <= 0.05
    assert delay(length, t, spec.mu) - sim.mean_sojourn == pytest.approx(1 / spec.mu, rel=0.05)


def test_system_delay_one_bs_corners():
    d = {1: 1.0, 2: 2.0, 3: 3.0, 4: 4.0, 5: 5.0, 6: 6.0}
    assert system_delay_one_bs(1.0, d) == pytest.approx(9.0)
    assert system_delay_one_bs(0.0, d) == pytest.approx(18.0)


def test_system_delay_one_bs_symmetry():
    base = [0.5, 0.5, 0.5, 0.5, 1.0, 0.9]
    m = [6, 6, 6, 6, 200, 20]
    for a in (0.2, 0.35):
        r1, r2 = analyze(one_bs(0.6, a, base, m)), analyze(one_bs(0.6, 1 - a, base, m))
        d1 = {q: k.delay for q, k in r1.per_queue.items()}
        d2 = {q: k.delay for q, k in r2.per_queue.items()}
        assert d1[1] == pytest.approx(d2[3], abs=1e-12)
        assert d1[2] == pytest.approx(d2[4], abs=1e-12)


def test_system_delay_skips_idle_branch():
    d = {1: 1.0, 2: 2.0, 3: None, 4: None, 5: None, 6: 6.0}
    notes: list[str] = []
    with pytest.warns(RuntimeWarning):
        assert system_delay_one_bs(0.7, d, notes) == pytest.approx(0.7 * 3 + 6)
    assert notes


def test_system_delay_two_bs_corners():
    assert system_delay_two_bs(1.0, 0.0, 3.0, 5.0, 2.0) == pytest.approx(5.0)
    assert system_delay_two_bs(0.4, 0.4, 3.0, 3.0, 2.0) == pytest.approx(0.4 * 6 + 2)
    assert system_delay_two_bs_normalized(0.4, 0.4, 3.0, 3.0, 2.0) == pytest.approx(5.0)


def test_system_delay_two_bs_against_simulation():
    cfg = two_bs(0.7, 0.5, 0.5, 0.5, [0.5] * 11, [50] * 5 + [100] + [50] * 5)
    sim = simulate(SimConfig(cfg, n_slots=1_000_000, seed=SEED))
    analytic = analyze(cfg).system_delay
    assert abs(analytic - sim.report.system_delay) / sim.report.system_delay <= 0.10


# --- congestion violation ---------------------------------------------------------

def test_congestion_violation_corners():
    spec = SingleQueueSpec(0.4, 0.5, 6)
    ss = single_queue_closed_form(spec)
    assert congestion_violation(ss, 6) == 0.0
    assert congestion_violation(ss, -1) == pytest.approx(1.0)
    assert congestion_violation(ss, 5) == pytest.approx(ss.probs[6])
    values = [congestion_violation(ss, c) for c in range(-1, 7)]
    assert all(a >= b for a, b in zip(values, values[1:]))


# --- report invariants --------------------------------------------------------------

def test_report_sums_and_bounds():
    rep = analyze(one_bs(0.8, 0.4, [0.4, 0.6, 0.5, 0.7, 0.5, 0.9], [5, 6, 7, 4, 3, 10]))
    drops, tasks = summarize(rep.per_queue)
    assert rep.system_drop_rate == drops and rep.system_mean_tasks == tasks
    mu = {1: 0.4, 2: 0.6, 3: 0.5, 4: 0.7, 5: 0.5, 6: 0.9}
    for q, k in rep.per_queue.items():
        assert k.throughput == pytest.approx(k.arrival_rate - k.drop_rate, abs=1e-15)
        assert 0 <= k.throughput <= k.arrival_rate + 1e-15
        assert k.delay >= 1 / mu[q]
    assert rep.system_throughput <= 0.8
