"""Write synthetic stand-ins for both study periods (blocks + hourly/daily sentiment).

    python scripts/make_synthetic_data.py --out data --scale 0.05
"""

import argparse
import json
from pathlib import Path

from gasforge.synthetic import PERIODS, write_period


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    ap.add_argument("--scale", type=float, default=0.05, help="fraction of each period's block count")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    periods = {}
    for i, (name, period) in enumerate(PERIODS.items()):
        n = max(100, int(period.n_blocks * args.scale))
        periods[period.label] = write_period(args.out, name, n_blocks=n, seed=args.seed + i)
        print(f"{name}: {n} blocks ({period.regime}) -> {periods[period.label]['blocks_path']}")
    manifest = Path(args.out) / "periods.json"
    manifest.write_text(json.dumps(periods, indent=2))
    print(f"period manifest: {manifest}")


if __name__ == "__main__":
    main()
