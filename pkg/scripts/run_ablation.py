"""Randomization ablation on the string-churn workload.

Replays one generated trace under three allocator configurations and writes
a summary table plus per-configuration stats CSVs.
"""

import argparse
import csv
import json
from pathlib import Path

from meshalloc import Config, Rng
from meshalloc.trace import STRING_CHURN_DEFAULTS, replay, string_churn

VARIANTS = {
    "mesh+rand": dict(),
    "mesh-only": dict(randomize=False),
    "no-mesh": dict(meshing=False),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/ablation", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=STRING_CHURN_DEFAULTS["count_per_round"])
    ap.add_argument("--rounds", type=int, default=STRING_CHURN_DEFAULTS["rounds"])
    ap.add_argument("--mesh-period", type=int, default=Config().mesh_period_events)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events = string_churn(args.rounds, args.count, rng=Rng(args.seed))
    summaries = {}
    for name, overrides in VARIANTS.items():
        cfg = Config(rng_seed=args.seed, mesh_period_events=args.mesh_period, **overrides)
        with open(out / f"{name}.csv", "w", newline="") as fh:
            summaries[name] = replay(events, cfg, csv_out=fh).as_dict()

    base = summaries["no-mesh"]["mean_rss"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "mean_rss", "peak_rss", "meshes_total", "ratio_vs_no_mesh"])
        for name, s in summaries.items():
            w.writerow([name, f"{s['mean_rss']:.1f}", s["peak_rss"], s["meshes_total"],
                        f"{s['mean_rss'] / base:.4f}"])
    print(json.dumps(summaries, indent=2, sort_keys=True))
    print(f"wrote {out}/summary.csv")


if __name__ == "__main__":
    main()
