#!/usr/bin/env python3
"""Write the two-view multiplicative-XOR benchmark as feature CSVs.

The emitted files feed the CLI pipeline:

    python3 scripts/make_xor_data.py --out data --per-class 60 --seed 7
    kernelforge gram --set 'data.features=["data/view1.csv","data/view2.csv"]' \
        --seed 7 --output data/kernels
    kernelforge compare --set data.manifest=data/kernels/manifest.json --seed 7 --output runs
"""

import argparse
from pathlib import Path

from kernelforge.kernel_io import save_feature_csv
from kernelforge.synthetic import xor_views


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--per-class", type=int, default=60)
    parser.add_argument("--classes", type=int, default=3)
    parser.add_argument("--noise", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    views, labels = xor_views(args.per_class, args.classes, args.noise, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, view in enumerate(views, start=1):
        save_feature_csv(out / f"view{i}.csv", view, labels)
    print(f"wrote {len(views)} views of {labels.size} points to {out}")


if __name__ == "__main__":
    main()
