#!/usr/bin/env python3
"""Plot per-epoch test accuracy (mean and spread over folds) from metrics.csv files."""

import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("metrics", nargs="+", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("curves.png"))
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(7, 4))
    for path in args.metrics:
        df = pd.read_csv(path)
        test = df[df["split"] == "test"]
        if test.empty:
            continue
        stats = test.groupby("epoch")["accuracy"].agg(["mean", "std"]).fillna(0.0)
        label = path.parent.name
        ax.plot(stats.index, stats["mean"], marker="o", label=label)
        ax.fill_between(stats.index, stats["mean"] - stats["std"], stats["mean"] + stats["std"], alpha=0.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("test accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
