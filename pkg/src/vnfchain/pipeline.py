"""Decomposition analysis of the full one-BS and two-BS systems.

Each base station contributes two tandem subsystems (processing+transmission
at the local server, transmission+processing towards the peer server) and
one single queue (transmission from the peer server to the core). The core
queue is solved last, fed by the effective output rates of the stations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .config import CORE, ConfigError, SystemConfig
from .kpi import (
    KpiReport,
    QueueKpi,
    branch_delay,
    core_drop_rate,
    mean_lengths,
    queue_kpi,
    single_queue_drop_rate,
    summarize,
    superposed_drop_rate_finite,
    system_delay_one_bs,
    system_delay_two_bs,
    system_delay_two_bs_normalized,
    tandem_drop_rates,
)
from .markov import (
    NonUniqueSteadyStateError,
    SolverError,
    SteadyState,
    TransitionMatrix,
    solve_from_start,
    solve_steady_state_direct,
)
from .subsystems import (
    CoreQueueSpec,
    SingleQueueSpec,
    SuperposedQueueSpec,
    TandemSpec,
    build_core_queue_matrix,
    build_single_queue_matrix,
    build_superposed_queue_matrix,
    build_tandem_matrix,
    busy_probability,
    effective_arrival_rate,
    infinite_superposed_steady_state,
    single_queue_closed_form,
)

Solver = Callable[[TransitionMatrix], SteadyState]


def _solve(name: str, solver: Solver, matrix: TransitionMatrix) -> SteadyState:
    try:
        try:
            return solver(matrix)
        except NonUniqueSteadyStateError:
            # several closed classes (e.g. lam = mu = 1): follow the one the empty system enters
            return solve_from_start(matrix, solver, start=0)
    except SolverError as exc:
        raise type(exc)(f"subsystem {name}: {exc}") from exc

# queue numbers of one station: local tandem, remote tandem, uplink to the core
STATION_QUEUES = {1: (1, 2, 3, 4, 5), 2: (7, 8, 9, 10, 11)}


@dataclass
class StationResult:
    queues: tuple[int, ...]
    kpis: dict[int, QueueKpi]
    feeds: tuple[float, float]  # rates offered to the core by its two branches
    steady_states: dict[str, SteadyState]


def solve_station(p: float, alpha: float, cfg: SystemConfig, queues: tuple[int, ...],
                  solver: Solver = solve_steady_state_direct) -> StationResult:
    """Solve the three subsystems of one base station in dependency order."""
    qa, qb, qc, qd, qe = queues
    mu, m = cfg.mu, cfg.m

    local = TandemSpec(p * alpha, mu[qa], mu[qb], m[qa], m[qb])
    remote = TandemSpec(p * (1 - alpha), mu[qc], mu[qd], m[qc], m[qd])
    ss_local = _solve(f"Q{qa}+Q{qb}", solver, build_tandem_matrix(local))
    ss_remote = _solve(f"Q{qc}+Q{qd}", solver, build_tandem_matrix(remote))

    lam_b = effective_arrival_rate(ss_local, mu[qa], 0)
    lam_d = effective_arrival_rate(ss_remote, mu[qc], 0)
    lam_e = effective_arrival_rate(ss_remote, mu[qd], 1)

    uplink = SingleQueueSpec(lam_e, mu[qe], m[qe])
    if lam_e < 1.0:
        ss_uplink = single_queue_closed_form(uplink)
    else:
        ss_uplink = _solve(f"Q{qe}", solver, build_single_queue_matrix(uplink))

    drop_a, drop_b = tandem_drop_rates(ss_local, local, lam_b)
    drop_c, drop_d = tandem_drop_rates(ss_remote, remote, lam_d)
    drop_e = single_queue_drop_rate(ss_uplink, uplink)
    len_a, len_b = mean_lengths(ss_local)
    len_c, len_d = mean_lengths(ss_remote)
    (len_e,) = mean_lengths(ss_uplink)

    kpis = {
        qa: queue_kpi(local.lam, drop_a, len_a, mu[qa]),
        qb: queue_kpi(lam_b, drop_b, len_b, mu[qb]),
        qc: queue_kpi(remote.lam, drop_c, len_c, mu[qc]),
        qd: queue_kpi(lam_d, drop_d, len_d, mu[qd]),
        qe: queue_kpi(lam_e, drop_e, len_e, mu[qe]),
    }
    feeds = (busy_probability(ss_local, 1) * mu[qb], busy_probability(ss_uplink) * mu[qe])
    states = {f"tandem_{qa}_{qb}": ss_local, f"tandem_{qc}_{qd}": ss_remote, f"single_{qe}": ss_uplink}
    return StationResult(queues, kpis, feeds, states)


def analyze_one_bs(cfg: SystemConfig, solver: Solver = solve_steady_state_direct,
                   core_solver: Solver | None = None) -> KpiReport:
    if cfg.topology != "one_bs":
        raise ConfigError("analyze_one_bs needs a one_bs config")
    (p,), (alpha,) = cfg.p, cfg.alpha
    station = solve_station(p, alpha, cfg, STATION_QUEUES[1], solver)
    lam_62, lam_65 = station.feeds
    core = SuperposedQueueSpec(lam_62, lam_65, cfg.mu[CORE], cfg.m.get(CORE))

    per_queue = dict(station.kpis)
    states: dict[str, object] = dict(station.steady_states)
    extras: dict[str, float | None] = {"lambda_6_2": lam_62, "lambda_6_5": lam_65}
    notes: list[str] = []
    stable = True

    if core.infinite:
        sol = infinite_superposed_steady_state(core)
        stable = sol.stable
        if stable:
            (len6,) = mean_lengths(sol.steady_state)
            per_queue[CORE] = queue_kpi(lam_62 + lam_65, 0.0, len6, core.mu)
            states["core"] = sol.steady_state
            extras["core_truncation"] = float(sol.n_states - 1)
        else:
            notes.append("core queue unstable: lambda_6 >= mu_6")
            per_queue[CORE] = QueueKpi(lam_62 + lam_65, float("nan"), float("inf"),
                                       float("nan"), None)
    else:
        ss6 = _solve("Q6", core_solver or solver, build_superposed_queue_matrix(core))
        (len6,) = mean_lengths(ss6)
        per_queue[CORE] = queue_kpi(lam_62 + lam_65, superposed_drop_rate_finite(ss6, core),
                                    len6, core.mu)
        states["core"] = ss6

    delays = {q: k.delay for q, k in per_queue.items()}
    d_sys = system_delay_one_bs(alpha, delays, notes) if stable else None
    if stable:
        drop_total, tasks_total = summarize(per_queue)
        throughput_total = per_queue[CORE].throughput
    else:
        drop_total = tasks_total = throughput_total = float("nan")
    return KpiReport(per_queue, drop_total, tasks_total, d_sys, throughput_total,
                     topology="one_bs", stable=stable, extras=extras,
                     steady_states=states, notes=notes)


def analyze_two_bs(cfg: SystemConfig, solver: Solver = solve_steady_state_direct,
                   core_solver: Solver | None = None) -> KpiReport:
    if cfg.topology != "two_bs":
        raise ConfigError("analyze_two_bs needs a two_bs config")
    stations = [
        solve_station(cfg.p[k], cfg.alpha[k], cfg, STATION_QUEUES[k + 1], solver)
        for k in range(2)
    ]
    feeds = stations[0].feeds + stations[1].feeds  # lambda_6,2 / 6,5 / 6,8 / 6,11
    core = CoreQueueSpec(feeds, cfg.mu[CORE], cfg.m[CORE])
    ss6 = _solve("Q6", core_solver or solver, build_core_queue_matrix(core))
    (len6,) = mean_lengths(ss6)

    per_queue: dict[int, QueueKpi] = {}
    states: dict[str, object] = {}
    for st in stations:
        per_queue.update(st.kpis)
        states.update(st.steady_states)
    lam6 = sum(feeds)
    per_queue[CORE] = queue_kpi(lam6, core_drop_rate(ss6, core), len6, core.mu)
    states["core"] = ss6
    per_queue = dict(sorted(per_queue.items()))

    notes: list[str] = []
    delays = {q: k.delay for q, k in per_queue.items()}
    aggregates = []
    for k, st in enumerate(stations):
        qa, qb, qc, qd, qe = st.queues
        aggregates.append(branch_delay(
            cfg.alpha[k], [delays[qa], delays[qb]], [delays[qc], delays[qd], delays[qe]], notes))
    a1, a2 = aggregates
    d6 = delays[CORE]
    t6 = per_queue[CORE].throughput
    share = [sum(feeds[:2]) / lam6, sum(feeds[2:]) / lam6] if lam6 > 0 else [0.0, 0.0]
    extras = {
        "lambda_6_2": feeds[0], "lambda_6_5": feeds[1],
        "lambda_6_8": feeds[2], "lambda_6_11": feeds[3],
        "A1": a1, "A2": a2,
        "D_BS1": None if d6 is None else a1 + d6,
        "D_BS2": None if d6 is None else a2 + d6,
        "throughput_BS1": t6 * share[0],
        "throughput_BS2": t6 * share[1],
        "system_delay_normalized": system_delay_two_bs_normalized(cfg.p1, cfg.p2, a1, a2, d6),
    }
    drop_total, tasks_total = summarize(per_queue)
    return KpiReport(per_queue, drop_total, tasks_total,
                     system_delay_two_bs(cfg.p1, cfg.p2, a1, a2, d6), t6,
                     topology="two_bs", extras=extras, steady_states=states, notes=notes)


def analyze(cfg: SystemConfig, solver: Solver = solve_steady_state_direct) -> KpiReport:
    if cfg.topology == "one_bs":
        return analyze_one_bs(cfg, solver)
    return analyze_two_bs(cfg, solver)
