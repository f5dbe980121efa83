"""Decomposition against the exact joint chain for tiny buffers.

Prints per-queue relative errors of throughput and mean length, and the
distance between the exact (q1, q2) marginal and the tandem solution.

    python3 scripts/decomposition_error.py --config configs/oracle_m2.toml
"""

import argparse

from vnfchain.config import load_config
from vnfchain.markov import solve_steady_state_direct, total_variation
from vnfchain.oracle import build_joint_chain, exact_kpis, joint_occupancy
from vnfchain.pipeline import analyze


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--buffers", type=int, default=None, help="override every buffer size")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.buffers is not None:
        cfg = cfg.replace(m={q: args.buffers for q in cfg.mu})
    ss = solve_steady_state_direct(build_joint_chain(cfg))
    exact, dec = exact_kpis(ss, cfg), analyze(cfg)

    print(f"{'queue':>5} {'T exact':>10} {'T dec':>10} {'rel':>8} {'L exact':>10} {'L dec':>10} {'rel':>8}")
    for q in sorted(exact.per_queue):
        e, d = exact.per_queue[q], dec.per_queue[q]
        rt = (d.throughput - e.throughput) / e.throughput if e.throughput else 0.0
        rl = (d.mean_length - e.mean_length) / e.mean_length if e.mean_length else 0.0
        print(f"{q:>5} {e.throughput:10.5f} {d.throughput:10.5f} {rt:8.2%} "
              f"{e.mean_length:10.5f} {d.mean_length:10.5f} {rl:8.2%}")
    joint = joint_occupancy(ss, cfg)
    for name, axes in (("tandem_1_2", (2, 3, 4, 5)), ("tandem_3_4", (0, 1, 4, 5))):
        marginal = joint.sum(axis=axes).ravel()
        print(f"TV({name}) = {total_variation(marginal, dec.steady_states[name].probs):.3e}")


if __name__ == "__main__":
    main()
