"""Slot-by-slot simulation of the coupled queueing network.

Every slot runs in two phases. First, each queue decides its departures
from the slot-start occupancy (one Bernoulli(mu) draw per busy server).
Then, at the end of the slot, exogenous arrivals and all tasks that just
departed are offered to their next queue; a task that finds its queue full
(after that queue's own departures) is dropped.

Randomness: every stochastic entity (each CPU of each queue, each arrival
source, each router) owns a PCG64 stream seeded with
``SeedSequence(seed, spawn_key=(entity_id,))`` and consumes exactly one
uniform per slot, used or not. Results depend only on (config, seed).

Empirical delays use the same Little's-law expression as the analytic
model, ``Q/T + 1/mu``, so the two are directly comparable. The timestamped
sojourn (departure slot minus arrival slot) is reported separately in
``mean_sojourn``; by Little's law it estimates ``Q/T`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np

from .config import CORE, SystemConfig
from .kpi import (
    KpiReport,
    QueueKpi,
    branch_delay,
    delay as little_delay,
    system_delay_one_bs,
    system_delay_two_bs,
    system_delay_two_bs_normalized,
)
from .subsystems import CoreQueueSpec, SuperposedQueueSpec

RNG_ALGORITHM = "numpy PCG64, SeedSequence(seed, spawn_key=(entity_id,))"
SOURCE_MODELS = ("independent_bernoulli", "stop_and_wait")
BLOCK_SLOTS = 1 << 15
N_BATCHES = 50
INFINITE_RING = 1 << 20
JOINT_GUARD = 200_000
HIST_CAP = 10_000


def service_entity(queue: int, cpu: int) -> int:
    return 100 * queue + cpu


def arrival_entity(source: int) -> int:
    return 10_000 + 2 * source


def routing_entity(source: int) -> int:
    return 10_000 + 2 * source + 1


@dataclass(frozen=True)
class SimConfig:
    system: SystemConfig
    n_slots: int = 1_000_000
    warmup_slots: int | None = None  # default: 1% of n_slots
    seed: int = 0
    source_model: str = "independent_bernoulli"
    track_sojourn: bool = True
    joint_occupancy: bool = False

    def __post_init__(self):
        if self.n_slots <= 0:
            raise ValueError("n_slots must be positive")
        if self.warmup_slots is None:
            object.__setattr__(self, "warmup_slots", self.n_slots // 100)
        if not 0 <= self.warmup_slots < self.n_slots:
            raise ValueError("warmup_slots must lie in [0, n_slots)")
        if self.source_model not in SOURCE_MODELS:
            raise ValueError(f"source_model must be one of {SOURCE_MODELS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class QueueSimStats:
    arrival_rate: float
    drop_rate: float  # tasks per slot
    drop_event_rate: float  # slots with at least one drop, per slot
    mean_length: float
    throughput: float
    departure_rate: float
    mean_sojourn: float | None
    delay: float | None
    occupancy: np.ndarray = field(repr=False)


@dataclass
class SimResult:
    per_queue: dict[int, QueueSimStats]
    report: KpiReport
    mean_sojourn: float | None  # end-to-end, timestamped
    delivered_rate: float
    counts: dict[str, int]
    std_errors: dict[str, float]
    seed: int
    n_slots: int
    warmup_slots: int
    source_model: str
    joint_occupancy: np.ndarray | None = field(default=None, repr=False)
    joint_shape: tuple[int, ...] | None = None
    raw: dict[str, Any] = field(default_factory=dict, repr=False)


# --- network description ------------------------------------------------------

@dataclass
class _Network:
    queues: list[int]  # external queue numbers, in kernel order
    cap: np.ndarray
    mu: np.ndarray
    servers: np.ndarray
    dest: np.ndarray
    src_p: np.ndarray
    src_alpha: np.ndarray
    src_dest_a: np.ndarray
    src_dest_b: np.ndarray
    infinite: np.ndarray

    @property
    def entities(self) -> list[int]:
        ids = []
        for k, q in enumerate(self.queues):
            ids.extend(service_entity(q, c) for c in range(int(self.servers[k])))
        for s in range(len(self.src_p)):
            ids.extend((arrival_entity(s), routing_entity(s)))
        return ids


_ONE_BS_DEST = {1: 2, 2: 6, 3: 4, 4: 5, 5: 6, 6: 0}
_TWO_BS_DEST = {**_ONE_BS_DEST, 7: 8, 8: 6, 9: 10, 10: 11, 11: 6}


def _system_network(cfg: SystemConfig) -> _Network:
    dest_map = _ONE_BS_DEST if cfg.topology == "one_bs" else _TWO_BS_DEST
    queues = sorted(dest_map)
    pos = {q: k for k, q in enumerate(queues)}
    cap, infinite = [], []
    for q in queues:
        m = cfg.m.get(q)
        infinite.append(m is None)
        cap.append(INFINITE_RING if m is None else m)
    servers = [cfg.n_cpus if q == CORE else 1 for q in queues]
    dest = [pos[dest_map[q]] if dest_map[q] else -1 for q in queues]
    if cfg.topology == "one_bs":
        src = [(cfg.p[0], cfg.alpha[0], pos[1], pos[3])]
    else:
        src = [(cfg.p[0], cfg.alpha[0], pos[1], pos[3]), (cfg.p[1], cfg.alpha[1], pos[7], pos[9])]
    return _Network(
        queues, np.array(cap, np.int64), np.array([cfg.mu[q] for q in queues]),
        np.array(servers, np.int64), np.array(dest, np.int64),
        np.array([s[0] for s in src]), np.array([s[1] for s in src]),
        np.array([s[2] for s in src], np.int64), np.array([s[3] for s in src], np.int64),
        np.array(infinite),
    )


def _isolated_network(spec: SuperposedQueueSpec | CoreQueueSpec) -> _Network:
    if isinstance(spec, CoreQueueSpec):
        feeds, servers, m = spec.lambdas, spec.n_cpus, spec.m
    else:
        feeds, servers, m = (spec.lam_a, spec.lam_b), 1, spec.m
    infinite = m is None
    n = len(feeds)
    return _Network(
        [CORE], np.array([INFINITE_RING if infinite else m], np.int64), np.array([spec.mu]),
        np.array([servers], np.int64), np.array([-1], np.int64),
        np.array(feeds, float), np.ones(n), np.zeros(n, np.int64), np.zeros(n, np.int64),
        np.array([infinite]),
    )


# --- kernel ------------------------------------------------------------------

@numba.njit(cache=True)
def _run_block(t0, n_block, u, warmup, n_slots, n_batches, stop_and_wait, binomial_service,
               cap, mu, servers, dest, src_p, src_alpha, src_dest_a, src_dest_b,
               occ, head, ring_off, ring_len, ring_arr, ring_gen, ring_org,
               device_busy, device_gen,
               occ_sum, offered, dropped, drop_events, departed, soj_sum, soj_cnt,
               e2e_sum, e2e_cnt, delivered_org,
               hist, hist_off, hist_len, joint, joint_radix, counts):
    n_q = cap.shape[0]
    n_src = src_p.shape[0]
    max_move = servers.sum() + n_src
    mv_dest = np.empty(max_move, np.int64)
    mv_arr = np.empty(max_move, np.int64)
    mv_gen = np.empty(max_move, np.int64)
    mv_org = np.empty(max_move, np.int64)
    dropflag = np.zeros(n_q, np.int64)
    window = n_slots - warmup
    for s in range(n_block):
        t = t0 + s
        rec = t >= warmup
        b = 0
        if rec:
            b = ((t - warmup) * n_batches) // window
            jidx = 0
            for q in range(n_q):
                occ_sum[b, q] += occ[q]
                h = occ[q]
                if h >= hist_len[q]:
                    h = hist_len[q] - 1
                hist[hist_off[q] + h] += 1
                jidx += occ[q] * joint_radix[q]
            if joint.shape[0] > 0:
                joint[jidx] += 1
        # phase 1: departures from the slot-start state
        col = 0
        n_mv = 0
        for q in range(n_q):
            busy = occ[q]
            if busy > servers[q]:
                busy = servers[q]
            d = 0
            for c in range(servers[q]):
                if (binomial_service or c < busy) and u[col + c, s] < mu[q]:
                    d += 1
            if d > busy:
                d = busy
            col += servers[q]
            for _ in range(d):
                slot = ring_off[q] + head[q]
                mv_dest[n_mv] = dest[q]
                mv_arr[n_mv] = t
                mv_gen[n_mv] = ring_gen[slot]
                mv_org[n_mv] = ring_org[slot]
                if rec:
                    soj_sum[b, q] += t - ring_arr[slot]
                    soj_cnt[b, q] += 1
                head[q] = (head[q] + 1) % ring_len[q]
                occ[q] -= 1
                n_mv += 1
            if rec:
                departed[b, q] += d
        # phase 2: exogenous arrivals, then forwarded tasks
        n_dep = n_mv
        for q in range(n_q):
            dropflag[q] = 0
        for k in range(n_src):
            ua = u[col + 2 * k, s]
            ur = u[col + 2 * k + 1, s]
            if stop_and_wait:
                if device_busy[k] == 0:
                    device_busy[k] = 1
                    device_gen[k] = t
                    counts[0] += 1
                if ua < src_p[k]:
                    gen = device_gen[k]
                    device_busy[k] = 0
                else:
                    continue
            else:
                if ua >= src_p[k]:
                    continue
                gen = t
                counts[0] += 1
            q = src_dest_a[k] if ur < src_alpha[k] else src_dest_b[k]
            mv_dest[n_mv] = q
            mv_arr[n_mv] = t
            mv_gen[n_mv] = gen
            mv_org[n_mv] = k
            n_mv += 1
        # exogenous tasks were appended last; offer them first
        for pass_ in range(2):
            lo = n_dep if pass_ == 0 else 0
            hi = n_mv if pass_ == 0 else n_dep
            for i in range(lo, hi):
                q = mv_dest[i]
                if q < 0:
                    counts[1] += 1
                    if rec:
                        e2e_sum[b] += t - mv_gen[i]
                        e2e_cnt[b] += 1
                        delivered_org[b, mv_org[i]] += 1
                    continue
                if rec:
                    offered[b, q] += 1
                if occ[q] < cap[q]:
                    slot = ring_off[q] + (head[q] + occ[q]) % ring_len[q]
                    ring_arr[slot] = t
                    ring_gen[slot] = mv_gen[i]
                    ring_org[slot] = mv_org[i]
                    occ[q] += 1
                else:
                    counts[2] += 1
                    if rec:
                        dropped[b, q] += 1
                        dropflag[q] = 1
        if rec:
            for q in range(n_q):
                drop_events[b, q] += dropflag[q]


def _simulate_network(net: _Network, n_slots: int, warmup: int, seed: int,
                      stop_and_wait: bool, joint_occupancy: bool,
                      binomial_service: bool = False) -> dict[str, Any]:
    n_q = len(net.queues)
    n_src = len(net.src_p)
    n_batches = min(N_BATCHES, n_slots - warmup)
    ring_len = np.where(net.infinite, INFINITE_RING, net.cap + 1).astype(np.int64)
    ring_off = np.concatenate([[0], np.cumsum(ring_len)[:-1]]).astype(np.int64)
    total_ring = int(ring_len.sum())
    hist_len = np.minimum(net.cap + 1, HIST_CAP + 1).astype(np.int64)
    hist_off = np.concatenate([[0], np.cumsum(hist_len)[:-1]]).astype(np.int64)
    radix = np.zeros(n_q, np.int64)
    n_joint = float(np.prod((net.cap + 1).astype(float)))
    if joint_occupancy and not net.infinite.any() and n_joint <= JOINT_GUARD:
        joint = np.zeros(int(n_joint), np.int64)
        radix[-1] = 1
        for q in range(n_q - 2, -1, -1):
            radix[q] = radix[q + 1] * (net.cap[q + 1] + 1)
    else:
        joint = np.zeros(0, np.int64)

    st = {
        "occ": np.zeros(n_q, np.int64), "head": np.zeros(n_q, np.int64),
        "ring_arr": np.zeros(total_ring, np.int64), "ring_gen": np.zeros(total_ring, np.int64),
        "ring_org": np.zeros(total_ring, np.int64),
        "device_busy": np.zeros(n_src, np.int64), "device_gen": np.zeros(n_src, np.int64),
    }
    acc = {name: np.zeros((n_batches, n_q), np.int64) for name in
           ("occ_sum", "offered", "dropped", "drop_events", "departed", "soj_sum", "soj_cnt")}
    acc["e2e_sum"] = np.zeros(n_batches, np.int64)
    acc["e2e_cnt"] = np.zeros(n_batches, np.int64)
    acc["delivered_org"] = np.zeros((n_batches, n_src), np.int64)
    hist = np.zeros(int(hist_len.sum()), np.int64)
    counts = np.zeros(3, np.int64)  # generated, delivered, dropped

    rngs = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(e,))))
            for e in net.entities]
    t = 0
    while t < n_slots:
        n_block = min(BLOCK_SLOTS, n_slots - t)
        u = np.empty((len(rngs), n_block))
        for k, rng in enumerate(rngs):
            u[k] = rng.random(n_block)
        _run_block(t, n_block, u, warmup, n_slots, n_batches, stop_and_wait, binomial_service,
                   net.cap, net.mu, net.servers, net.dest, net.src_p, net.src_alpha,
                   net.src_dest_a, net.src_dest_b,
                   st["occ"], st["head"], ring_off, ring_len, st["ring_arr"], st["ring_gen"],
                   st["ring_org"], st["device_busy"], st["device_gen"],
                   acc["occ_sum"], acc["offered"], acc["dropped"], acc["drop_events"],
                   acc["departed"], acc["soj_sum"], acc["soj_cnt"],
                   acc["e2e_sum"], acc["e2e_cnt"], acc["delivered_org"],
                   hist, hist_off, hist_len, joint, radix, counts)
        t += n_block

    batch_len = np.array([
        ((b + 1) * (n_slots - warmup) + n_batches - 1) // n_batches
        - (b * (n_slots - warmup) + n_batches - 1) // n_batches
        for b in range(n_batches)
    ], float)
    in_system = int(st["occ"].sum() + (st["device_busy"].sum() if stop_and_wait else 0))
    return {
        "acc": acc, "batch_len": batch_len, "hist": hist, "hist_off": hist_off,
        "hist_len": hist_len, "joint": joint if joint.size else None,
        "joint_shape": tuple(int(c) + 1 for c in net.cap) if joint.size else None,
        "counts": {"generated": int(counts[0]), "delivered": int(counts[1]),
                   "dropped": int(counts[2]), "in_system": in_system},
    }


# --- result assembly ----------------------------------------------------------

def _ratio(num: np.ndarray, den: np.ndarray) -> float | None:
    d = float(np.sum(den))
    return None if d == 0 else float(np.sum(num)) / d


def _queue_stats(raw: dict[str, Any], net: _Network, rows: slice | np.ndarray) -> dict[int, QueueSimStats]:
    acc, blen = raw["acc"], raw["batch_len"][rows]
    slots = blen.sum()
    out = {}
    for k, q in enumerate(net.queues):
        offered = acc["offered"][rows, k].sum() / slots
        dropped = acc["dropped"][rows, k].sum() / slots
        length = acc["occ_sum"][rows, k].sum() / slots
        thr = offered - dropped
        soj = _ratio(acc["soj_sum"][rows, k], acc["soj_cnt"][rows, k])
        off, n = raw["hist_off"][k], raw["hist_len"][k]
        h = raw["hist"][off:off + n].astype(float)
        out[q] = QueueSimStats(
            arrival_rate=offered, drop_rate=dropped,
            drop_event_rate=acc["drop_events"][rows, k].sum() / slots,
            mean_length=length, throughput=thr,
            departure_rate=acc["departed"][rows, k].sum() / slots,
            mean_sojourn=soj, delay=little_delay(length, thr, float(net.mu[k])),
            occupancy=h / h.sum() if h.sum() else h,
        )
    return out


def _report_from_stats(stats: dict[int, QueueSimStats], cfg: SystemConfig,
                       delivered_by_origin: np.ndarray, slots: float) -> KpiReport:
    per_queue = {q: QueueKpi(s.arrival_rate, s.drop_rate, s.mean_length, s.throughput, s.delay)
                 for q, s in stats.items()}
    drops = sum(k.drop_rate for k in per_queue.values())
    tasks = sum(k.mean_length for k in per_queue.values())
    delays = {q: k.delay for q, k in per_queue.items()}
    notes: list[str] = []
    t6 = per_queue[CORE].throughput
    extras: dict[str, float | None] = {}
    if cfg.topology == "one_bs":
        d_sys = system_delay_one_bs(cfg.alpha[0], delays, notes)
    else:
        a1 = branch_delay(cfg.alpha[0], [delays[1], delays[2]], [delays[3], delays[4], delays[5]], notes)
        a2 = branch_delay(cfg.alpha[1], [delays[7], delays[8]], [delays[9], delays[10], delays[11]], notes)
        d6 = delays[CORE]
        d_sys = system_delay_two_bs(cfg.p1, cfg.p2, a1, a2, d6)
        extras.update({
            "A1": a1, "A2": a2,
            "D_BS1": None if d6 is None else a1 + d6,
            "D_BS2": None if d6 is None else a2 + d6,
            "throughput_BS1": float(delivered_by_origin[0]) / slots,
            "throughput_BS2": float(delivered_by_origin[1]) / slots,
            "system_delay_normalized": system_delay_two_bs_normalized(cfg.p1, cfg.p2, a1, a2, d6),
        })
    return KpiReport(per_queue, drops, tasks, d_sys, t6, topology=cfg.topology,
                     extras=extras, notes=notes)


def kpi_vector(report: KpiReport) -> dict[str, float]:
    """Flat name -> value view of the KPIs compared across evaluators."""
    out: dict[str, float] = {}
    for q, k in report.per_queue.items():
        out[f"Q{q}.drop_rate"] = k.drop_rate
        out[f"Q{q}.mean_length"] = k.mean_length
        out[f"Q{q}.throughput"] = k.throughput
        if k.delay is not None:
            out[f"Q{q}.delay"] = k.delay
    out["system_drop_rate"] = report.system_drop_rate
    out["system_mean_tasks"] = report.system_mean_tasks
    out["system_throughput"] = report.system_throughput
    if report.system_delay is not None:
        out["system_delay"] = report.system_delay
    return out


def _batch_std_errors(raw: dict[str, Any], net: _Network, cfg: SystemConfig) -> dict[str, float]:
    n_b = len(raw["batch_len"])
    if n_b < 2:
        return {}
    per_batch: dict[str, list[float]] = {}
    for b in range(n_b):
        rows = np.array([b])
        stats = _queue_stats(raw, net, rows)
        rep = _report_from_stats(stats, cfg, raw["acc"]["delivered_org"][b], raw["batch_len"][b])
        for name, val in kpi_vector(rep).items():
            per_batch.setdefault(name, []).append(val)
    return {name: float(np.std(v, ddof=1) / np.sqrt(len(v)))
            for name, v in per_batch.items() if len(v) == n_b}


def simulate(cfg: SimConfig) -> SimResult:
    system = cfg.system
    net = _system_network(system)
    raw = _simulate_network(net, cfg.n_slots, cfg.warmup_slots, cfg.seed,
                            cfg.source_model == "stop_and_wait", cfg.joint_occupancy)
    rows = slice(None)
    slots = float(raw["batch_len"].sum())
    stats = _queue_stats(raw, net, rows)
    delivered = raw["acc"]["delivered_org"].sum(axis=0)
    report = _report_from_stats(stats, system, delivered, slots)
    if not cfg.track_sojourn:
        for s in stats.values():
            s.mean_sojourn = None
    joint = raw["joint"]
    return SimResult(
        per_queue=stats, report=report,
        mean_sojourn=_ratio(raw["acc"]["e2e_sum"], raw["acc"]["e2e_cnt"]) if cfg.track_sojourn else None,
        delivered_rate=float(delivered.sum()) / slots,
        counts=raw["counts"], std_errors=_batch_std_errors(raw, net, system),
        seed=cfg.seed, n_slots=cfg.n_slots, warmup_slots=cfg.warmup_slots,
        source_model=cfg.source_model,
        joint_occupancy=None if joint is None else joint / joint.sum(),
        joint_shape=raw["joint_shape"], raw=raw,
    )


SERVICE_MODES = ("per_busy_cpu", "binomial")


def simulate_isolated_queue(spec: SuperposedQueueSpec | CoreQueueSpec, n_slots: int,
                            seed: int = 0, warmup_slots: int | None = None,
                            service: str = "per_busy_cpu") -> QueueSimStats:
    """Drive one queue with its independent Bernoulli feeds; returns its statistics.

    ``service="per_busy_cpu"`` completes each occupied CPU with probability mu,
    as in :func:`simulate`. ``"binomial"`` draws X ~ Binomial(n_cpus, mu)
    completions and removes ``min(X, occupancy)`` tasks, so a lone task leaves
    when any CPU completes.
    """
    if service not in SERVICE_MODES:
        raise ValueError(f"service must be one of {SERVICE_MODES}")
    net = _isolated_network(spec)
    warmup = n_slots // 100 if warmup_slots is None else warmup_slots
    raw = _simulate_network(net, n_slots, warmup, seed, False, False, service == "binomial")
    return _queue_stats(raw, net, slice(None))[CORE]
