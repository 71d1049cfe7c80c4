"""SSL probe vs supervised baseline on synthetic cohorts, averaged over seeds.

    python scripts/run_headline.py --seeds 0 1 2 3 4 --out headline.json
"""

import argparse
import json
import logging
from dataclasses import replace

from ecgssl.evalharness.headline import HeadlineConfig, run_headline
from ecgssl.ssl.pretrain import METHODS


def main():
    defaults = HeadlineConfig()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=list(defaults.seeds))
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(defaults.methods))
    p.add_argument("--label-budget", type=int, default=defaults.label_budget)
    p.add_argument("--epochs", type=int, default=defaults.ssl.epochs)
    p.add_argument("--jobs", type=int, help="worker processes over seeds (default: one per core)")
    p.add_argument("--out", help="write the summary and per-seed AUCs as JSON")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    cfg = replace(defaults, seeds=tuple(args.seeds), methods=tuple(args.methods),
                  label_budget=args.label_budget, jobs=args.jobs, ssl=replace(defaults.ssl, epochs=args.epochs))
    res = run_headline(cfg)
    summary = res.summary()
    best = summary["best_method"]

    print(f"{'seed':>4}  " + "  ".join(f"{m:>7}" for m in cfg.methods) + f"  {'superv.':>7}  {'control':>7}")
    for s in res.seeds:
        cells = "  ".join(f"{s.ssl_auc[m]:7.3f}" for m in cfg.methods)
        print(f"{s.seed:>4}  {cells}  {s.supervised_auc:7.3f}  {s.control_auc[best]:7.3f}")
    print(f"best SSL method: {best}  AUC {summary['ssl_auc'][best]:.3f}")
    print(f"supervised AUC {summary['supervised_auc']:.3f}  delta {summary['delta_abs']:+.3f} "
          f"({100 * summary['delta_rel']:+.1f}%)  control {summary['control_auc']:.3f}  "
          f"{summary['seconds']:.0f}s")
    if args.out:
        doc = dict(summary, seeds=[
            {"seed": s.seed, "ssl_auc": s.ssl_auc, "control_auc": s.control_auc,
             "supervised_auc": s.supervised_auc, "seconds": s.seconds} for s in res.seeds
        ])
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
