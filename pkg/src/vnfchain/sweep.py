"""Parameter sweeps, exhaustive routing search and performance regions."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ConfigError, SystemConfig
from .kpi import KpiReport
from .markov import SolverError
from .pipeline import analyze
from .simulator import SimConfig, simulate

OBJECTIVES = {"throughput": "max", "delay": "min", "drop_rate": "min"}
TIE_RTOL = 1e-12


def alpha_grid(step: float = 0.05) -> list[float]:
    n = int(round(1 / step))
    return [round(k * step, 10) for k in range(n + 1)]


DEFAULT_ALPHA_GRID = alpha_grid()


@dataclass(frozen=True)
class SimEvaluator:
    seed: int = 0
    n_slots: int = 1_000_000
    warmup_slots: int | None = None


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    axis: str
    grid: Sequence[float]
    objective: str = "throughput"
    evaluator: str | SimEvaluator = "analytic"

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ConfigError("sweep grid is empty")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {sorted(OBJECTIVES)}")
        if not (self.evaluator == "analytic" or isinstance(self.evaluator, SimEvaluator)):
            raise ConfigError("evaluator must be 'analytic' or a SimEvaluator")
        for v in self.grid:  # surfaces invalid axis names and values up front
            self.base.with_param(self.axis, v)


@dataclass
class SweepPoint:
    value: float
    report: KpiReport | None
    error: str | None = None
    seed: int | None = None
    config: SystemConfig | None = field(default=None, repr=False)


def objective_value(report: KpiReport, objective: str) -> float | None:
    value = {
        "throughput": report.system_throughput,
        "delay": report.system_delay,
        "drop_rate": report.system_drop_rate,
    }[objective]
    if value is None or not math.isfinite(value):
        return None
    return value


def _evaluate(cfg: SystemConfig, evaluator: str | SimEvaluator) -> KpiReport:
    if evaluator == "analytic":
        return analyze(cfg)
    sim = simulate(SimConfig(cfg, n_slots=evaluator.n_slots,
                             warmup_slots=evaluator.warmup_slots, seed=evaluator.seed))
    return sim.report


def _evaluate_point(args: tuple[float, SystemConfig, str | SimEvaluator]) -> SweepPoint:
    value, cfg, evaluator = args
    seed = None if evaluator == "analytic" else evaluator.seed
    try:
        return SweepPoint(value, _evaluate(cfg, evaluator), seed=seed, config=cfg)
    except (SolverError, ValueError, ArithmeticError) as exc:
        return SweepPoint(value, None, error=f"{type(exc).__name__}: {exc}", seed=seed, config=cfg)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepPoint]:
    """Evaluate every grid value; failures are recorded per point and the sweep goes on."""
    jobs = [(v, spec.base.with_param(spec.axis, v), spec.evaluator) for v in spec.grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_evaluate_point, jobs))
    return [_evaluate_point(job) for job in jobs]


def best_point(points: Sequence[SweepPoint], objective: str) -> SweepPoint:
    """Grid optimum; ties (within TIE_RTOL) go to the smallest axis value."""
    scored = [(p, objective_value(p.report, objective)) for p in points if p.report is not None]
    scored = [(p, v) for p, v in scored if v is not None]
    if not scored:
        raise SolverError("every sweep point failed")
    sign = 1.0 if OBJECTIVES[objective] == "max" else -1.0
    best = max(sign * v for _, v in scored)
    tol = TIE_RTOL * max(1.0, abs(best))
    winners = [p for p, v in scored if sign * v >= best - tol]
    return min(winners, key=lambda p: p.value)


def find_optimal_alpha(cfg: SystemConfig, objective: str = "throughput",
                       grid: Sequence[float] = DEFAULT_ALPHA_GRID, axis: str = "alpha",
                       evaluator: str | SimEvaluator = "analytic") -> tuple[float, KpiReport]:
    points = run_sweep(SweepSpec(cfg, axis, grid, objective, evaluator))
    best = best_point(points, objective)
    return best.value, best.report


@dataclass(frozen=True)
class RegionPoint:
    throughput: float
    delay: float
    drop_rate: float
    mu: float
    m: int


def performance_region(mu_grid: Sequence[float], m_grid: Sequence[int], template: SystemConfig,
                       mu_queues: Sequence[int] = (3, 4, 5),
                       m_queues: Sequence[int] = (1, 2, 3, 4, 5)) -> tuple[list[RegionPoint], list[str]]:
    """Evaluate every (mu, M) pair; returns the points and the per-point failures."""
    points, failures = [], []
    for mu in mu_grid:
        for m in m_grid:
            cfg = template.replace(mu={**template.mu, **{q: float(mu) for q in mu_queues}},
                                   m={**template.m, **{q: int(m) for q in m_queues}})
            try:
                rep = analyze(cfg)
            except (SolverError, ValueError) as exc:
                failures.append(f"mu={mu}, M={m}: {exc}")
                continue
            if rep.system_delay is None or not np.isfinite(rep.system_throughput):
                failures.append(f"mu={mu}, M={m}: no defined delay")
                continue
            points.append(RegionPoint(rep.system_throughput, rep.system_delay,
                                      rep.system_drop_rate, float(mu), int(m)))
    return points, failures
