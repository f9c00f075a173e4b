"""Run the desk-scale variant comparison and print a summary table.

Usage:
    python scripts/run_desk_experiment.py [--seeds 0,1,2,3,4] [--epochs 30]
        [--variants imp2font,cgan+] [--cache .cache/deskexp] [--out results.json]

Training runs are cached by experiment fingerprint, so re-running with the
same settings only re-scores.
"""

import argparse
import json
import logging
from pathlib import Path

from wordglyph.deskexp import DeskExperiment, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--d-steps-per-g-step", type=int, default=1)
    parser.add_argument("--n-fonts", type=int, default=80)
    parser.add_argument("--variants", default="imp2font,cgan+")
    parser.add_argument("--cache", default=".cache/deskexp")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    spec = DeskExperiment(seeds=tuple(int(s) for s in args.seeds.split(",")),
                          epochs=args.epochs, n_fonts=args.n_fonts,
                          d_steps_per_g_step=args.d_steps_per_g_step)
    variants = tuple(args.variants.split(","))
    cache = Path(args.cache)
    cache.mkdir(parents=True, exist_ok=True)
    results = run_experiment(spec, cache_dir=cache, variants=variants)

    rows = results["per_seed"]
    metric_keys = [k for k in rows[0] if k != "seed"]
    print("\nseed  " + "  ".join(f"{k:>24s}" for k in metric_keys))
    for row in rows:
        print(f"{row['seed']:>4d}  "
              + "  ".join(f"{row.get(k, float('nan')):>24.4f}" for k in metric_keys))
    if "fid_imp2font" in rows[0] and "fid_cgan+" in rows[0]:
        wins = sum(1 for r in rows if r["fid_imp2font"] < r["fid_cgan+"])
        print(f"\nfid ordering (imp2font < cgan+): {wins}/{len(rows)} seeds")

    if args.out:
        Path(args.out).write_text(json.dumps(results, indent=2, default=str))
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
