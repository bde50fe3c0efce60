#!/usr/bin/env python3
"""Fit all three model families on one synthetic portfolio and print the
comparison report (accuracy bands, interaction scan, overfitting scans).

Typical run:

    python3 scripts/run_comparison.py --n 200 --seed 3
"""

import argparse
import sys
from pathlib import Path

from pricelab.ann import train
from pricelab.dataset import GeneratorParams, generate_synthetic, load_csv, split_half
from pricelab.evaluation import compare, render_markdown, report_csv
from pricelab.gam import fit_gam
from pricelab.glm import fit_glm


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=200, help="portfolio size")
    p.add_argument("--seed", type=int, default=3, help="generator and split seed")
    p.add_argument("--noise", type=float, default=600.0, help="noise scale")
    p.add_argument("--interaction", type=float, default=8000.0,
                   help="smoker x severity interaction strength")
    p.add_argument("--csv", type=Path, default=None,
                   help="fit a CSV portfolio instead of a generated one")
    p.add_argument("--out", type=Path, default=None,
                   help="also write <out>.md and <out>.csv")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    if args.csv is not None:
        data = load_csv(args.csv)
    else:
        data = generate_synthetic(GeneratorParams(
            n=args.n, seed=args.seed,
            noise_scale=args.noise, interaction=args.interaction,
        ))
    train_half, test_half = split_half(data, seed=args.seed)
    models = [
        fit_glm(train_half),
        fit_gam(train_half),
        train(train_half),
    ]
    report = compare(models, test_half, train=train_half, seed=args.seed)
    markdown = render_markdown(report)
    print(markdown, end="")
    if args.out is not None:
        args.out.with_suffix(".md").write_text(markdown)
        args.out.with_suffix(".csv").write_text(report_csv(report))
        print(f"\nwrote {args.out.with_suffix('.md')} and {args.out.with_suffix('.csv')}",
              file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
