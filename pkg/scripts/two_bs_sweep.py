"""Per-station throughput and delay of the two-BS system against p1.

    python3 scripts/two_bs_sweep.py --config configs/fig7.toml --out out/fig7.csv
"""

import argparse
from pathlib import Path

from vnfchain.cli import parse_grid, write_csv
from vnfchain.config import load_config
from vnfchain.pipeline import analyze


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--grid", default="0.1:0.9:0.1")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    base = load_config(args.config)
    rows = []
    for p1 in parse_grid(args.grid):
        rep = analyze(base.with_param("p1", p1))
        e = rep.extras
        rows.append([p1, e["throughput_BS1"], e["throughput_BS2"], e["D_BS1"], e["D_BS2"],
                     rep.system_throughput, rep.system_delay, e["system_delay_normalized"]])
    out = Path(args.out)
    write_csv(out, ["p1", "throughput_BS1", "throughput_BS2", "delay_BS1", "delay_BS2",
                    "throughput", "delay", "delay_normalized"], rows)
    print(f"wrote {out}")

    if args.plot:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        for k, label in ((1, "BS1"), (2, "BS2")):
            ax.plot([r[k + 2] for r in rows], [r[k] for r in rows], "o-", label=label)
        ax.set_xlabel("delay (slots)")
        ax.set_ylabel("throughput (tasks/slot)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out.with_suffix(".png"), dpi=120)


if __name__ == "__main__":
    main()
