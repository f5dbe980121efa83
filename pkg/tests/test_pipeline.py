import numpy as np
import pytest

from vnfchain.config import CORE, ConfigError, one_bs, two_bs
from vnfchain.markov import SolverError
from vnfchain.pipeline import analyze, analyze_one_bs, analyze_two_bs
from vnfchain.simulator import SimConfig, simulate

FIG3_MU = [0.5] * 5 + [1.0]
FIG3_M = [10] * 5 + [100]


def _mu_m_two_bs(mu_bs1, mu_bs2, m_bs1, m_bs2, mu6=0.5, m6=30):
    mu = {**dict(zip(range(1, 6), mu_bs1)), CORE: mu6, **dict(zip(range(7, 12), mu_bs2))}
    m = {**dict(zip(range(1, 6), m_bs1)), CORE: m6, **dict(zip(range(7, 12), m_bs2))}
    return mu, m


def test_no_traffic():
    rep = analyze_one_bs(one_bs(0.0, 0.5, FIG3_MU, FIG3_M))
    assert rep.system_drop_rate == 0.0 and rep.system_mean_tasks == 0.0
    assert all(k.throughput == 0.0 for k in rep.per_queue.values())


def test_single_branch_routing():
    rep = analyze_one_bs(one_bs(0.8, 1.0, FIG3_MU, FIG3_M))
    assert rep.per_queue[3].throughput == rep.per_queue[4].throughput == rep.per_queue[5].throughput == 0
    assert rep.extras["lambda_6_5"] == 0.0
    assert rep.system_delay is not None


def test_fig3_throughput_against_simulation():
    cfg = one_bs(0.8, 0.5, FIG3_MU, FIG3_M)
    analytic = analyze_one_bs(cfg).system_throughput
    sim = simulate(SimConfig(cfg, n_slots=1_000_000, seed=0)).report.system_throughput
    assert abs(analytic - sim) / sim <= 0.05


def test_effective_rates_bounded_by_service():
    mu = [0.35, 0.45, 0.55, 0.25, 0.65, 0.9]
    rep = analyze_one_bs(one_bs(0.9, 0.4, mu, [4, 5, 6, 7, 8, 9]))
    q = rep.per_queue
    assert q[2].arrival_rate <= mu[0] and q[4].arrival_rate <= mu[2] and q[5].arrival_rate <= mu[3]
    assert rep.extras["lambda_6_2"] <= mu[1] and rep.extras["lambda_6_5"] <= mu[4]


def test_core_change_leaves_upstream_untouched():
    cfg = one_bs(0.7, 0.3, [0.4, 0.5, 0.6, 0.5, 0.4, 0.9], [6] * 5 + [12])
    a = analyze_one_bs(cfg)
    b = analyze_one_bs(cfg.with_param("mu_6", 0.6))
    for name, ss in a.steady_states.items():
        if name != "core":
            assert np.array_equal(ss.probs, b.steady_states[name].probs)
    for q in range(1, 6):
        assert a.per_queue[q] == b.per_queue[q]
    assert a.per_queue[CORE] != b.per_queue[CORE]


def test_symmetric_throughput_curve():
    mu, m = [0.5, 0.6, 0.5, 0.6, 1.0, 1.0], [8, 8, 8, 8, 300, 400]
    for a in np.arange(0.0, 0.51, 0.1):
        lo, hi = analyze(one_bs(0.8, a, mu, m)), analyze(one_bs(0.8, 1 - a, mu, m))
        assert lo.per_queue[1].throughput == pytest.approx(hi.per_queue[3].throughput, abs=1e-12)
        assert lo.per_queue[2].throughput == pytest.approx(hi.per_queue[4].throughput, abs=1e-12)
        assert lo.system_throughput == pytest.approx(hi.system_throughput, abs=1e-12)


def test_infinite_core_stable_and_unstable():
    ok = analyze(one_bs(0.4, 0.5, [0.5] * 5 + [0.9], [6] * 5, core_infinite=True))
    assert ok.stable and ok.per_queue[CORE].drop_rate == 0.0
    bad = analyze(one_bs(0.9, 0.5, [0.9] * 5 + [0.3], [6] * 5, core_infinite=True))
    assert not bad.stable and bad.system_delay is None and bad.notes


def test_topology_mismatch():
    with pytest.raises(ConfigError):
        analyze_two_bs(one_bs(0.5, 0.5, FIG3_MU, FIG3_M))


def test_solver_error_names_the_subsystem():
    def broken(_matrix):
        raise SolverError("no convergence")

    with pytest.raises(SolverError, match="Q1\\+Q2"):
        analyze_one_bs(one_bs(0.5, 0.5, FIG3_MU, FIG3_M), solver=broken)


# --- two base stations ----------------------------------------------------------------

@pytest.mark.filterwarnings("ignore:branch with weight")
def test_two_bs_no_traffic():
    mu, m = _mu_m_two_bs([0.5] * 5, [0.5] * 5, [5] * 5, [5] * 5)
    rep = analyze_two_bs(two_bs(0.0, 0.0, 0.5, 0.5, mu, m))
    assert rep.system_throughput == 0.0 and rep.system_drop_rate == 0.0
    assert rep.system_mean_tasks == 0.0


def test_two_bs_mirror_symmetry():
    mu_a, mu_b = [0.4, 0.6, 0.5, 0.7, 0.45], [0.55, 0.35, 0.6, 0.5, 0.65]
    m_a, m_b = [5, 6, 7, 5, 6], [6, 5, 5, 7, 4]
    mu, m = _mu_m_two_bs(mu_a, mu_b, m_a, m_b)
    mu_s, m_s = _mu_m_two_bs(mu_b, mu_a, m_b, m_a)
    a = analyze_two_bs(two_bs(0.6, 0.3, 0.3, 0.7, mu, m))
    b = analyze_two_bs(two_bs(0.3, 0.6, 0.7, 0.3, mu_s, m_s))
    assert a.extras["D_BS1"] == pytest.approx(b.extras["D_BS2"], rel=1e-10)
    assert a.extras["D_BS2"] == pytest.approx(b.extras["D_BS1"], rel=1e-10)
    for field in ("arrival_rate", "drop_rate", "mean_length", "throughput"):
        assert getattr(a.per_queue[CORE], field) == pytest.approx(getattr(b.per_queue[CORE], field), rel=1e-10)


def test_two_bs_share_and_bounds():
    mu, m = _mu_m_two_bs([0.5] * 5, [0.5] * 5, [8] * 5, [8] * 5, m6=20)
    rep = analyze_two_bs(two_bs(0.7, 0.5, 0.5, 0.5, mu, m))
    e = rep.extras
    assert e["throughput_BS1"] + e["throughput_BS2"] == pytest.approx(rep.system_throughput)
    assert e["throughput_BS1"] > e["throughput_BS2"]
    assert rep.system_throughput <= 0.7 + 0.5
    assert len(rep.per_queue) == 11


def test_fig7_trends():
    mu, m = _mu_m_two_bs([0.5] * 5, [0.5] * 5, [50] * 5, [50] * 5, m6=100)
    reps = {p1: analyze(two_bs(p1, 0.5, 0.5, 0.5, mu, m)) for p1 in (0.1, 0.3, 0.5, 0.7, 0.9)}
    thr = [reps[p].extras["throughput_BS1"] for p in sorted(reps)]
    assert all(b >= a for a, b in zip(thr, thr[1:]))
    assert reps[0.9].extras["D_BS2"] > reps[0.3].extras["D_BS2"]
