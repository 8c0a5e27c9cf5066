"""Refinement-study figure: log-log error with order-1 and order-2 guides."""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import SchemaError
from ._table import PNG_METADATA, read_table


def plot_convergence(input_csv, out_png):
    table = read_table(input_csv, required=("level", "tau_or_h", "error"))
    steps = table["tau_or_h"]
    errors = table["error"]
    order = np.argsort(steps)[::-1]   # coarsest first
    steps = steps[order]
    errors = errors[order]

    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    ax.loglog(steps, errors, "o-", color="tab:blue", label="measured")
    # reference slopes anchored at the coarsest measured point
    anchor_s, anchor_e = steps[0], errors[0]
    ax.loglog(steps, anchor_e * (steps / anchor_s), "--", color="gray",
              label="order 1")
    ax.loglog(steps, anchor_e * (steps / anchor_s) ** 2, ":", color="gray",
              label="order 2")
    ax.set_xlabel("step size")
    ax.set_ylabel("error")
    ax.legend(fontsize="small")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return out_png


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="Log-log refinement plot from convergence.csv")
    ap.add_argument("--input", required=True, help="convergence.csv path")
    ap.add_argument("--out", required=True, help="output PNG path")
    args = ap.parse_args(argv)
    try:
        plot_convergence(args.input, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
