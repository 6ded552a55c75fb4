"""Run the 2 periods x k in {3,2,1} x 4 sentiment settings grid and print the table.

    python scripts/make_synthetic_data.py --out data
    python scripts/run_study_matrix.py --periods data/periods.json --out results
"""

import argparse
import json
import logging
from pathlib import Path

from gasforge.bench import emit_report, study_grid, render_markdown, run_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", default="data/periods.json")
    ap.add_argument("--out", default="results")
    ap.add_argument("--model", default="nam")
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    periods = json.loads(Path(args.periods).read_text())
    specs = study_grid(periods, model_kind=args.model, trials=args.trials,
                       overrides={"epochs": args.epochs})
    rows = run_matrix(specs, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fmt, ext in (("csv", "csv"), ("json", "json"), ("markdown", "md")):
        emit_report(rows, out / f"matrix_{args.model}.{ext}", fmt)
    print(render_markdown(rows))
    for r in rows:
        if r.ok:
            print(f"{r.period} | k={r.k} | {r.settings} | mse={r.mse:.5f} var={r.variance:.2e}")


if __name__ == "__main__":
    main()
