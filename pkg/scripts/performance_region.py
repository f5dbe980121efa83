"""Throughput/delay scatter over (mu, M), colored by system drop rate.

    python3 scripts/performance_region.py --config configs/fig8.toml --out out/fig8.csv --plot
"""

import argparse
from pathlib import Path

from vnfchain.cli import parse_grid, write_csv
from vnfchain.config import load_config
from vnfchain.sweep import performance_region


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--mu-grid", default="0.1:0.9:0.05")
    ap.add_argument("--m-grid", default="5:50:5")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    m_grid = [int(v) for v in parse_grid(args.m_grid)]
    points, failures = performance_region(parse_grid(args.mu_grid), m_grid, load_config(args.config))
    for f in failures:
        print("skipped:", f)
    out = Path(args.out)
    write_csv(out, ["mu", "M", "throughput", "delay", "drop_rate"],
              [[p.mu, p.m, p.throughput, p.delay, p.drop_rate] for p in points])
    print(f"wrote {out} ({len(points)} points)")

    if args.plot:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5.5, 4))
        sc = ax.scatter([p.delay for p in points], [p.throughput for p in points],
                        c=[p.drop_rate for p in points], s=10)
        ax.set_xlabel("delay (slots)")
        ax.set_ylabel("throughput (tasks/slot)")
        fig.colorbar(sc, label="drop rate")
        fig.tight_layout()
        fig.savefig(out.with_suffix(".png"), dpi=120)


if __name__ == "__main__":
    main()
