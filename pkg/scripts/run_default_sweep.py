"""Run the shipped default sweep and print the seed-averaged R^2 table.

    python scripts/run_default_sweep.py --out runs/default --workers 4
"""

import argparse
import time

from tvbench.config import parse_config
from tvbench.plotting import aggregate
from tvbench.runner import resolve_output_dir, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="default")
    ap.add_argument("--out", default=None)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = parse_config(args.config)
    out = resolve_output_dir(args.out, cfg)
    t0 = time.perf_counter()
    records = run_sweep(cfg, out, workers=args.workers)
    elapsed = time.perf_counter() - t0

    rows = aggregate(records)
    sigmas = sorted({r["sigma"] for r in rows})
    table = {(r["model"], r["sigma"]): r["r2_mean"] for r in rows}
    print("model".ljust(15) + "".join(f"{s:>8g}" for s in sigmas))
    for model in dict.fromkeys(r["model"] for r in rows):
        print(model.ljust(15) + "".join(f"{table[(model, s)]:8.3f}" for s in sigmas))
    print(f"\n{len(records)} records in {elapsed:.0f} s, written to {out}")


if __name__ == "__main__":
    main()
