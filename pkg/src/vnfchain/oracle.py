"""Exact joint Markov chain of the one-BS system for small buffers.

The state is the full occupancy vector (q1..q6). One slot is built by brute
force: every departure pattern over the six queues (a queue departs with
probability mu when non-empty), times the three arrival outcomes (nothing,
a task to Q1, a task to Q3). Departed tasks move on at the end of the slot
and are accepted while their destination has room after its own departure.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp

from .config import CORE, SystemConfig
from .kpi import KpiReport, QueueKpi, delay, system_delay_one_bs
from .markov import SteadyState, TransitionMatrix

STATE_GUARD = 200_000
N_QUEUES = 6
# downstream queue of each queue (0-based), -1 leaves the system
_DEST = np.array([1, 5, 3, 4, 5, -1])


class StateSpaceGuardError(ValueError):
    """The joint state space exceeds STATE_GUARD states."""


def joint_shape(cfg: SystemConfig) -> tuple[int, ...]:
    if cfg.topology != "one_bs":
        raise ValueError("the joint oracle covers the one_bs topology only")
    if cfg.core_infinite:
        raise ValueError("the joint oracle needs a finite core buffer")
    return tuple(cfg.m[q] + 1 for q in range(1, N_QUEUES + 1))


def _check_guard(shape: tuple[int, ...]) -> int:
    n = int(np.prod(shape, dtype=float))
    if n > STATE_GUARD:
        raise StateSpaceGuardError(f"joint chain would have {n} states (limit {STATE_GUARD})")
    return n


def _outcomes(cfg: SystemConfig):
    """Yield (prob, next_state_index, offered, dropped) arrays over all states per outcome."""
    shape = joint_shape(cfg)
    n = _check_guard(shape)
    occ = np.array(np.unravel_index(np.arange(n), shape)).T  # (n, 6)
    cap = np.array(shape) - 1
    mu = np.array([cfg.mu[q] for q in range(1, N_QUEUES + 1)])
    p, alpha = cfg.p[0], cfg.alpha[0]
    arrivals = ((1 - p, None), (p * alpha, 0), (p * (1 - alpha), 2))
    busy = occ > 0
    for pattern in itertools.product((0, 1), repeat=N_QUEUES):
        dep = np.array(pattern)
        can = busy | (dep == 0)
        prob = np.where(dep == 1, mu, np.where(busy, 1 - mu, 1.0))
        base_prob = np.prod(np.broadcast_to(prob, occ.shape), axis=1) * can.all(axis=1)
        if not base_prob.any():
            continue
        after = np.maximum(occ - dep, 0)  # rows with dep on empty queues have prob 0
        forwarded = np.zeros(N_QUEUES, int)
        for k in range(N_QUEUES):
            if dep[k] and _DEST[k] >= 0:
                forwarded[_DEST[k]] += 1
        for a_prob, target in arrivals:
            if a_prob == 0:
                continue
            offered = np.broadcast_to(forwarded, occ.shape).copy()
            if target is not None:
                offered[:, target] += 1
            accepted = np.minimum(offered, cap - after)
            nxt = after + accepted
            yield (base_prob * a_prob, np.ravel_multi_index(nxt.T, shape),
                   offered, offered - accepted)


def build_joint_chain(cfg: SystemConfig) -> TransitionMatrix:
    shape = joint_shape(cfg)
    n = _check_guard(shape)
    rows, cols, vals = [], [], []
    src = np.arange(n)
    for prob, nxt, _, _ in _outcomes(cfg):
        keep = prob > 0
        rows.append(src[keep])
        cols.append(nxt[keep])
        vals.append(prob[keep])
    kernel = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    kernel.sum_duplicates()
    labels = [tuple(int(x) for x in s) for s in np.array(np.unravel_index(np.arange(n), shape)).T]
    entries = kernel if n > 400 else kernel.toarray()
    return TransitionMatrix(entries, labels)


def expected_flows(cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-state expected offered and dropped tasks per queue, each of shape (n, 6)."""
    n = _check_guard(joint_shape(cfg))
    offered = np.zeros((n, N_QUEUES))
    dropped = np.zeros((n, N_QUEUES))
    for prob, _, off, drop in _outcomes(cfg):
        offered += prob[:, None] * off
        dropped += prob[:, None] * drop
    return offered, dropped


def joint_occupancy(ss: SteadyState, cfg: SystemConfig) -> np.ndarray:
    return np.asarray(ss.probs).reshape(joint_shape(cfg))


def exact_kpis(ss: SteadyState, cfg: SystemConfig) -> KpiReport:
    offered, dropped = expected_flows(cfg)
    pi = np.asarray(ss.probs)
    occ = np.array(np.unravel_index(np.arange(len(pi)), joint_shape(cfg))).T
    per_queue = {}
    for k in range(N_QUEUES):
        q = k + 1
        lam = float(pi @ offered[:, k])
        drop = float(pi @ dropped[:, k])
        length = float(pi @ occ[:, k])
        thr = lam - drop
        per_queue[q] = QueueKpi(lam, drop, length, thr, delay(length, thr, cfg.mu[q]))
    notes: list[str] = []
    delays = {q: k.delay for q, k in per_queue.items()}
    return KpiReport(
        per_queue,
        sum(k.drop_rate for k in per_queue.values()),
        sum(k.mean_length for k in per_queue.values()),
        system_delay_one_bs(cfg.alpha[0], delays, notes),
        per_queue[CORE].throughput,
        topology="one_bs", notes=notes,
    )
