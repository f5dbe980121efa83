"""Command-line entry point: analyze, simulate, sweep, region, validate."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, SystemConfig, load_config, queue_ids
from .kpi import KpiReport
from .markov import SolverError, solve_steady_state_direct
from .oracle import StateSpaceGuardError, build_joint_chain, exact_kpis, joint_occupancy
from .pipeline import analyze
from .simulator import RNG_ALGORITHM, SOURCE_MODELS, SimConfig, kpi_vector, simulate
from .subsystems import TruncationError
from .sweep import (
    OBJECTIVES,
    SimEvaluator,
    SweepSpec,
    objective_value,
    performance_region,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_GUARD = 0, 2, 3, 4
SIG_DIGITS = 12

# acceptance-style gates used by `validate`
Z_LIMIT = 3.0
TV_LIMIT = 5e-3
THROUGHPUT_RTOL = 0.05
LENGTH_RTOL = 0.10


# --- CSV ----------------------------------------------------------------------

def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{SIG_DIGITS}g}"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path: Path) -> list[dict[str, Any]]:
    with open(path, newline="") as fh:
        return [{k: parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# --- grids ----------------------------------------------------------------------

def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    spec = spec.strip()
    try:
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ConfigError("grid step must be positive")
            n = int(math.floor((stop - start) / step + 1e-9))
            return [round(start + k * step, 10) for k in range(n + 1)]
        values = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}: {exc}") from exc
    if not values:
        raise ConfigError("grid is empty")
    return values


# --- record builders ----------------------------------------------------------------

QUEUE_HEADER = ["queue", "role", "arrival_rate", "drop_rate", "mean_length", "throughput", "delay"]


def report_rows(report: KpiReport, cfg: SystemConfig) -> list[list[Any]]:
    roles = {qid.index: qid.role.value for qid in queue_ids(cfg.topology)}
    rows = []
    for q, k in sorted(report.per_queue.items()):
        rows.append([f"Q{q}", roles[q], k.arrival_rate, k.drop_rate, k.mean_length,
                     k.throughput, k.delay])
    arrival = sum(cfg.p)
    rows.append(["system", "", arrival, report.system_drop_rate, report.system_mean_tasks,
                 report.system_throughput, report.system_delay])
    return rows


class Manifest:
    def __init__(self, subcommand: str, cfg: SystemConfig, args: argparse.Namespace):
        self.start = time.perf_counter()
        self.data: dict[str, Any] = {
            "tool": "vnfchain", "version": __version__, "subcommand": subcommand,
            "config": cfg.to_dict(), "flags": {k: v for k, v in vars(args).items() if k != "func"},
            "outputs": [],
        }

    def add(self, path: Path) -> Path:
        self.data["outputs"].append(str(path))
        return path

    def write(self, out: Path, **extra: Any) -> Path:
        path = out.with_name(out.name + ".manifest.json")
        self.data.update(extra)
        self.data["wall_time_s"] = time.perf_counter() - self.start
        self.data["outputs"].append(str(path))
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=str) + "\n")
        return path


# --- subcommands ------------------------------------------------------------------

def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    man = Manifest("analyze", cfg, args)
    report = analyze(cfg)
    out = Path(args.out)
    write_csv(man.add(out), QUEUE_HEADER, report_rows(report, cfg))
    if args.states:
        state_dir = Path(args.states)
        for name, ss in report.steady_states.items():
            path = man.add(state_dir / f"{name}.csv")
            write_csv(path, ["state", "probability"],
                      ([" ".join(map(str, lab)) if isinstance(lab, tuple) else lab, pr]
                       for lab, pr in zip(ss.labels, ss.probs)))
    man.write(out, notes=report.notes, stable=report.stable)
    return EXIT_OK


SIM_HEADER = ["queue", "arrival_rate", "drop_rate", "drop_event_rate", "mean_length",
              "throughput", "delay", "mean_sojourn"]


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    man = Manifest("simulate", cfg, args)
    sim = simulate(SimConfig(cfg, n_slots=args.slots, warmup_slots=args.warmup, seed=args.seed,
                             source_model=args.source_model))
    rows = [[f"Q{q}", s.arrival_rate, s.drop_rate, s.drop_event_rate, s.mean_length,
             s.throughput, s.delay, s.mean_sojourn] for q, s in sorted(sim.per_queue.items())]
    rep = sim.report
    rows.append(["system", sim.counts["generated"] / sim.n_slots, rep.system_drop_rate, None,
                 rep.system_mean_tasks, rep.system_throughput, rep.system_delay, sim.mean_sojourn])
    out = Path(args.out)
    write_csv(man.add(out), SIM_HEADER, rows)
    counts = out.with_name(out.stem + ".counts.csv")
    write_csv(man.add(counts), ["name", "value"],
              list(sim.counts.items()) + [(f"se:{k}", v) for k, v in sorted(sim.std_errors.items())])
    man.write(out, seed=sim.seed, rng=RNG_ALGORITHM, warmup_slots=sim.warmup_slots)
    return EXIT_OK


def _evaluator(args: argparse.Namespace):
    if args.evaluator == "analytic":
        return "analytic"
    return SimEvaluator(seed=args.seed, n_slots=args.slots, warmup_slots=args.warmup)


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    man = Manifest("sweep", cfg, args)
    spec = SweepSpec(cfg, args.axis, parse_grid(args.grid), args.objective, _evaluator(args))
    points = run_sweep(spec, workers=args.workers)
    rows = []
    for pt in points:
        rep = pt.report
        rows.append([args.axis, pt.value,
                     None if rep is None else rep.system_throughput,
                     None if rep is None else rep.system_delay,
                     None if rep is None else rep.system_drop_rate,
                     None if rep is None else objective_value(rep, args.objective),
                     args.evaluator, pt.seed, pt.error])
    out = Path(args.out)
    write_csv(man.add(out), ["axis", "value", "throughput", "delay", "drop_rate", "objective",
                             "evaluator", "seed", "error"], rows)
    man.write(out, failures=sum(pt.error is not None for pt in points))
    return EXIT_OK


def cmd_region(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    man = Manifest("region", cfg, args)
    m_grid = [int(round(v)) for v in parse_grid(args.m_grid)]
    points, failures = performance_region(parse_grid(args.mu_grid), m_grid, cfg)
    out = Path(args.out)
    write_csv(man.add(out), ["mu", "M", "throughput", "delay", "drop_rate"],
              [[p.mu, p.m, p.throughput, p.delay, p.drop_rate] for p in points])
    man.write(out, failures=failures)
    return EXIT_OK


VALIDATE_HEADER = ["kpi", "analytic", "simulated", "sim_se", "exact", "rel_err_analytic",
                   "z_sim", "gate", "status"]


def _gate(name: str) -> tuple[str, float] | None:
    if name.endswith(".throughput") or name == "system_throughput":
        return "rel", THROUGHPUT_RTOL
    if name.endswith(".mean_length") or name == "system_mean_tasks":
        return "rel", LENGTH_RTOL
    return None


def validation_rows(cfg: SystemConfig, n_slots: int, seed: int) -> tuple[list[list[Any]], bool]:
    """Three-way comparison table and whether every gate held."""
    analytic = kpi_vector(analyze(cfg))
    try:
        shape_ok = cfg.topology == "one_bs" and not cfg.core_infinite
        if not shape_ok:
            raise StateSpaceGuardError("joint oracle needs a finite one_bs config")
        chain = build_joint_chain(cfg)
        ss = solve_steady_state_direct(chain)
        exact = kpi_vector(exact_kpis(ss, cfg))
    except StateSpaceGuardError:
        ss, exact = None, None
    sim = simulate(SimConfig(cfg, n_slots=n_slots, seed=seed, joint_occupancy=exact is not None))
    simulated, se = kpi_vector(sim.report), sim.std_errors
    rows, ok = [], True
    for name in analytic:
        a, s = analytic[name], simulated.get(name)
        e = None if exact is None else exact.get(name)
        err = se.get(name)
        ref = e if e is not None else s
        rel = None if ref in (None, 0) or a is None else (a - ref) / abs(ref)
        z = None
        if e is not None and s is not None and err:
            z = (s - e) / err
        elif e is not None and s is not None and s == e:
            z = 0.0
        gates, status = [], "pass"
        if e is not None:
            gates.append(f"|z|<={Z_LIMIT:g}")
            if z is None or abs(z) > Z_LIMIT:
                status = "fail"
            g = _gate(name)
            if g is not None:
                gates.append(f"rel<={g[1]:g}")
                if rel is None and abs(a - e) > 1e-12 or rel is not None and abs(rel) > g[1]:
                    status = "fail"
        else:
            status = "info"
        ok &= status != "fail"
        rows.append([name, a, s, err, e, rel, z, " ".join(gates) or "oracle skipped", status])
    if ss is not None and sim.joint_occupancy is not None:
        tv = 0.5 * float(np.abs(joint_occupancy(ss, cfg).ravel() - sim.joint_occupancy).sum())
        status = "pass" if tv <= TV_LIMIT else "fail"
        ok &= status == "pass"
        rows.append(["joint_occupancy_tv", None, tv, None, 0.0, None, None,
                     f"tv<={TV_LIMIT:g}", status])
    return rows, ok


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.buffers is not None:
        cfg = cfg.replace(m={q: args.buffers for q in cfg.mu}, core_infinite=False)
    man = Manifest("validate", cfg, args)
    rows, ok = validation_rows(cfg, args.slots, args.seed)
    out = Path(args.out)
    write_csv(man.add(out), VALIDATE_HEADER, rows)
    man.write(out, seed=args.seed, all_gates_pass=ok)
    if not args.quiet:
        for r in rows:
            print(f"{r[0]:26s} {r[-1]}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vnfchain", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="TOML system config")
        p.add_argument("--out", required=True, help="output CSV path")

    def sim_flags(p: argparse.ArgumentParser, slots: int) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--slots", type=int, default=slots)
        p.add_argument("--warmup", type=int, default=None, help="default: 1%% of slots")

    p = sub.add_parser("analyze", help="decomposition KPIs")
    common(p)
    p.add_argument("--states", help="directory for steady-state sidecar CSVs")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="slot-level simulation")
    common(p)
    sim_flags(p, 1_000_000)
    p.add_argument("--source-model", choices=SOURCE_MODELS, default=SOURCE_MODELS[0])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="one-parameter sweep")
    common(p)
    p.add_argument("--axis", default="alpha")
    p.add_argument("--grid", default="0:1:0.05")
    p.add_argument("--objective", choices=sorted(OBJECTIVES) + ["drop"], default="throughput")
    p.add_argument("--evaluator", choices=("analytic", "sim"), default="analytic")
    p.add_argument("--workers", type=int, default=1)
    sim_flags(p, 1_000_000)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("region", help="throughput/delay/drop region over (mu, M)")
    common(p)
    p.add_argument("--mu-grid", default="0.1:0.9:0.1")
    p.add_argument("--m-grid", default="5:50:5")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("validate", help="oracle vs simulation vs decomposition")
    common(p)
    sim_flags(p, 10_000_000)
    p.add_argument("--buffers", type=int, default=None, help="override every buffer size")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "objective", None) == "drop":
        args.objective = "drop_rate"
    try:
        return args.func(args)
    except (StateSpaceGuardError, TruncationError) as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
