"""Drop rates, queue lengths, throughput and delay from solved steady states."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .markov import SteadyState, expectation
from .subsystems import (
    CoreQueueSpec,
    SingleQueueSpec,
    SuperposedQueueSpec,
    TandemSpec,
    binomial_departure_pmf,
    core_arrival_batch_pmf,
)


@dataclass(frozen=True)
class QueueKpi:
    arrival_rate: float
    drop_rate: float
    mean_length: float
    throughput: float
    delay: float | None  # None when the queue carries no traffic


@dataclass
class KpiReport:
    per_queue: dict[int, QueueKpi]
    system_drop_rate: float
    system_mean_tasks: float
    system_delay: float | None
    system_throughput: float
    topology: str = "one_bs"
    stable: bool = True
    extras: dict[str, float | None] = field(default_factory=dict)
    steady_states: dict[str, Any] = field(default_factory=dict, repr=False)
    notes: list[str] = field(default_factory=list)

    def queue_rows(self) -> list[dict[str, Any]]:
        return [
            {"queue": q, **{k: getattr(kpi, k) for k in QueueKpi.__dataclass_fields__}}
            for q, kpi in sorted(self.per_queue.items())
        ]


# --- drop rates ---------------------------------------------------------------

def tandem_drop_rates(ss: SteadyState, spec: TandemSpec, lam_second: float | None = None,
                      printed: bool = True) -> tuple[float, float]:
    """Per-slot drop probabilities of the first and the second tandem queue.

    The second-queue rate multiplies Pr{first busy, second full} by the
    second queue's effective arrival rate ``lam_second`` (derived from ``ss``
    when omitted). Since that joint probability already conditions on a busy
    first queue, ``printed=False`` uses ``mu_first`` instead, which is the
    exact rate for the tandem chain.
    """
    levels = ss.coordinate(0)
    phases = ss.coordinate(1)
    full_first = ss.probs[levels == spec.m_first].sum()
    full_second = ss.probs[(phases == spec.m_second) & (levels >= 1)].sum()
    if not printed:
        feed = spec.mu_first
    elif lam_second is None:
        feed = spec.mu_first * ss.probs[levels >= 1].sum()
    else:
        feed = lam_second
    drop_first = spec.lam * (1 - spec.mu_first) * full_first
    drop_second = feed * (1 - spec.mu_second) * full_second
    return float(drop_first), float(drop_second)


def single_queue_drop_rate(ss: SteadyState, spec: SingleQueueSpec) -> float:
    return float(spec.lam * (1 - spec.mu) * ss.probs[spec.m])


def superposed_drop_rate_finite(
    ss: SteadyState, spec: SuperposedQueueSpec, printed: bool = False
) -> float:
    """Expected tasks dropped per slot at a finite two-feed queue.

    A full queue that serves a task can take only one of two simultaneous
    arrivals, so the exact rate carries ``mu * p02 * pi_M`` on top of the
    terms for an idle server. ``printed=True`` leaves that term out.
    """
    _, p01, p02 = spec.batch_pmf
    mu, m = spec.mu, spec.m
    pi_m1, pi_m = ss.probs[m - 1], ss.probs[m]
    rate = p02 * (1 - mu) * pi_m1 + (p01 + 2 * p02) * pi_m * (1 - mu)
    if not printed:
        rate += p02 * mu * pi_m
    return float(rate)


def core_drop_terms(ss: SteadyState, spec: CoreQueueSpec) -> dict[int, float]:
    """Expected drops per slot contributed by states ``M``, ``M-1``, ``M-2``, ``M-3``."""
    p = core_arrival_batch_pmf(spec.lambdas)
    mu, m = spec.mu, spec.m
    x0, x1, x2 = (binomial_departure_pmf(2, mu, k) for k in range(3))
    pi = ss.probs
    top = pi[m] * (
        p[1] * x0 + 2 * p[2] * x0 + p[2] * x1 + 3 * p[3] * x0 + 2 * p[3] * x1
        + p[3] * x2 + 4 * p[4] * x0 + 3 * p[4] * x1 + 2 * p[4] * x2
    )
    one_free = pi[m - 1] * (
        p[2] * x0 + 2 * p[3] * x0 + p[3] * x1 + 3 * p[4] * x0 + 2 * p[4] * x1 + p[4] * x2
    )
    # two free places: weights as printed, not max(0, k - x - 2)
    two_free = pi[m - 2] * (p[3] * x0 + 2 * p[4] * x1 + p[4] * x2)
    three_free = pi[m - 3] * p[4] * x0
    return {0: float(top), 1: float(one_free), 2: float(two_free), 3: float(three_free)}


def core_drop_rate(ss: SteadyState, spec: CoreQueueSpec) -> float:
    return sum(core_drop_terms(ss, spec).values())


def congestion_violation(ss: SteadyState, threshold: int) -> float:
    """Pr{Q > threshold} for a single-queue steady state."""
    lengths = ss.coordinate()
    return float(ss.probs[lengths > threshold].sum())


# --- lengths, throughput, delay ---------------------------------------------

def mean_lengths(ss: SteadyState) -> tuple[float, ...]:
    first = ss.labels[0] if len(ss) else 0
    if isinstance(first, tuple):
        return tuple(expectation(ss, k) for k in range(len(first)))
    return (expectation(ss),)


def throughput(lam: float, drop_rate: float) -> float:
    return lam - drop_rate


def delay(mean_length: float, throughput_: float, mu: float) -> float | None:
    """Little's-law queue delay plus one mean service time; None without traffic."""
    if throughput_ <= 0:
        return None
    return mean_length / throughput_ + 1 / mu


def queue_kpi(lam: float, drop_rate: float, mean_length: float, mu: float) -> QueueKpi:
    t = throughput(lam, drop_rate)
    return QueueKpi(lam, drop_rate, mean_length, t, delay(mean_length, t, mu))


def _weighted_path(weighted: Sequence[tuple[float, Sequence[float | None]]], notes: list[str]) -> float | None:
    total = 0.0
    for weight, delays in weighted:
        if weight == 0:
            continue
        if any(d is None for d in delays):
            msg = f"branch with weight {weight:g} carries no traffic; left out of the delay"
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
            notes.append(msg)
            continue
        total += weight * sum(delays)
    return total


def branch_delay(alpha: float, first: Sequence[float | None], second: Sequence[float | None],
                 notes: list[str] | None = None) -> float | None:
    """alpha * (sum of first-branch delays) + (1 - alpha) * (sum of second-branch delays)."""
    return _weighted_path([(alpha, first), (1 - alpha, second)], notes if notes is not None else [])


def system_delay_one_bs(alpha: float, delays: Mapping[int, float | None],
                        notes: list[str] | None = None) -> float | None:
    notes = notes if notes is not None else []
    if delays[6] is None:
        return None
    head = branch_delay(alpha, [delays[1], delays[2]], [delays[3], delays[4], delays[5]], notes)
    return head + delays[6]


def system_delay_two_bs(p1: float, p2: float, a1: float | None, a2: float | None,
                        d6: float | None) -> float | None:
    """p1 * A1 + p2 * A2 + D6 with the raw success probabilities as weights."""
    if d6 is None:
        return None
    return p1 * (a1 or 0.0) + p2 * (a2 or 0.0) + d6


def system_delay_two_bs_normalized(p1: float, p2: float, a1: float | None, a2: float | None,
                                   d6: float | None) -> float | None:
    """Same as :func:`system_delay_two_bs` with the weights rescaled to sum to 1."""
    if d6 is None or p1 + p2 == 0:
        return None
    return (p1 * (a1 or 0.0) + p2 * (a2 or 0.0)) / (p1 + p2) + d6


def summarize(per_queue: Mapping[int, QueueKpi]) -> tuple[float, float]:
    """(system drop rate, mean number of tasks in the system)."""
    drops = float(np.sum([k.drop_rate for k in per_queue.values()]))
    tasks = float(np.sum([k.mean_length for k in per_queue.values()]))
    return drops, tasks
