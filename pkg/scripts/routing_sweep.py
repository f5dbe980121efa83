"""Throughput, delay and drop rate against the routing probability alpha.

Analytic curve over the full grid plus simulation points at a coarser grid.

    python3 scripts/routing_sweep.py --config configs/fig3.toml --out out/fig3.csv --plot
"""

import argparse
from pathlib import Path

from vnfchain.cli import parse_grid, write_csv
from vnfchain.config import load_config
from vnfchain.sweep import SimEvaluator, SweepSpec, run_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--grid", default="0:1:0.05")
    ap.add_argument("--sim-grid", default="0.1:0.9:0.1")
    ap.add_argument("--slots", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    cfg = load_config(args.config)
    rows = []
    for evaluator, grid in (("analytic", args.grid), (SimEvaluator(args.seed, args.slots), args.sim_grid)):
        name = "analytic" if evaluator == "analytic" else "sim"
        for pt in run_sweep(SweepSpec(cfg, "alpha", parse_grid(grid), evaluator=evaluator), args.workers):
            r = pt.report
            rows.append([name, pt.value, r.system_throughput, r.system_delay, r.system_drop_rate])
    out = Path(args.out)
    write_csv(out, ["evaluator", "alpha", "throughput", "delay", "drop_rate"], rows)
    print(f"wrote {out}")

    if args.plot:
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
        for k, label in enumerate(("throughput", "delay", "drop rate")):
            for name, style in (("analytic", "-"), ("sim", "o")):
                pts = [r for r in rows if r[0] == name]
                axes[k].plot([r[1] for r in pts], [r[2 + k] for r in pts], style, label=name)
            axes[k].set_xlabel("alpha")
            axes[k].set_ylabel(label)
        axes[0].legend()
        fig.tight_layout()
        fig.savefig(out.with_suffix(".png"), dpi=120)


if __name__ == "__main__":
    main()
