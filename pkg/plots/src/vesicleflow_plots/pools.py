"""Reservoir evolution: Lambda_s (left panel) and Lambda_n (right panel)."""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import SchemaError
from ._table import PNG_METADATA, read_table


def plot_pools(input_csv, out_png):
    table = read_table(input_csv, required=("t", "lambda_n", "lambda_s"))
    fig, (ax_s, ax_n) = plt.subplots(1, 2, figsize=(7.2, 3.2))
    ax_s.plot(table["t"], table["lambda_s"], color="tab:red")
    ax_s.set_title(r"$\Lambda_s(t)$")
    ax_n.plot(table["t"], table["lambda_n"], color="tab:blue")
    ax_n.set_title(r"$\Lambda_n(t)$")
    for ax in (ax_s, ax_n):
        ax.set_xlabel("t")
        ax.margins(x=0.0)
    fig.tight_layout()
    fig.savefig(out_png, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return out_png


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="Reservoir time series from pools.csv")
    ap.add_argument("--input", required=True, help="pools.csv path")
    ap.add_argument("--out", required=True, help="output PNG path")
    args = ap.parse_args(argv)
    try:
        plot_pools(args.input, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
