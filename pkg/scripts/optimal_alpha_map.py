"""Grid-optimal alpha over (mu1, mu3) for a throughput or delay objective.

    python3 scripts/optimal_alpha_map.py --config configs/fig5a.toml --objective delay --out out/fig5a.csv
"""

import argparse
from pathlib import Path

from vnfchain.cli import parse_grid, write_csv
from vnfchain.config import load_config
from vnfchain.sweep import DEFAULT_ALPHA_GRID, find_optimal_alpha, objective_value


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--objective", choices=("throughput", "delay", "drop_rate"), default="throughput")
    ap.add_argument("--mu-grid", default="0.1:0.9:0.2")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    base = load_config(args.config)
    mus = parse_grid(args.mu_grid)
    rows = []
    for mu1 in mus:
        for mu3 in mus:
            cfg = base.with_param("mu_1", mu1).with_param("mu_3", mu3)
            alpha, rep = find_optimal_alpha(cfg, args.objective, DEFAULT_ALPHA_GRID)
            rows.append([mu1, mu3, alpha, objective_value(rep, args.objective)])
            print(f"mu1={mu1:.2f} mu3={mu3:.2f} alpha*={alpha:.2f}")
    out = Path(args.out)
    write_csv(out, ["mu1", "mu3", "alpha", args.objective], rows)

    if args.plot:
        import matplotlib.pyplot as plt
        import numpy as np

        grid = np.array([r[2] for r in rows]).reshape(len(mus), len(mus))
        fig, ax = plt.subplots(figsize=(4.5, 4))
        im = ax.imshow(grid, origin="lower", extent=(mus[0], mus[-1], mus[0], mus[-1]), vmin=0, vmax=1)
        ax.set_xlabel("mu3")
        ax.set_ylabel("mu1")
        fig.colorbar(im, label="optimal alpha")
        fig.tight_layout()
        fig.savefig(out.with_suffix(".png"), dpi=120)


if __name__ == "__main__":
    main()
