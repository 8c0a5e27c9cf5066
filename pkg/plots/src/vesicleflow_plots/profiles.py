"""Profile snapshots: one panel per requested time, both species overlaid."""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import SchemaError
from ._table import PNG_METADATA, read_table


def _match_times(requested, available):
    """Map each requested time to an available snapshot time."""
    chosen = []
    for t in requested:
        gaps = np.abs(available - t)
        k = int(np.argmin(gaps))
        if gaps[k] > 1e-9 * max(1.0, abs(t)):
            listing = ", ".join(f"{a:g}" for a in available)
            raise SchemaError(
                f"time {t:g} not in the file; available times: {listing}")
        chosen.append(available[k])
    return chosen


def plot_profiles(input_csv, times, out_png):
    """Render the snapshot panels; returns the output path, or None for an
    empty time list (warned, nothing written)."""
    table = read_table(input_csv, required=("t", "x", "u1", "u2", "u0"))
    available = np.unique(table["t"])
    if len(times) == 0:
        print("warning: no times requested, nothing to plot", file=sys.stderr)
        return None
    chosen = _match_times(times, available)

    n = len(chosen)
    fig, axes = plt.subplots(1, n, figsize=(3.4 * n, 3.2), squeeze=False)
    for ax, t in zip(axes[0], chosen):
        sel = table["t"] == t
        order = np.argsort(table["x"][sel])
        x = table["x"][sel][order]
        ax.plot(x, table["u1"][sel][order], "-", color="tab:blue",
                label="species 1")
        ax.plot(x, table["u2"][sel][order], "--", color="tab:red",
                label="species 2")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.0)
        ax.set_xlabel("x")
        ax.set_title(f"t = {t:g}")
    axes[0, 0].set_ylabel("concentration")
    axes[0, 0].legend(loc="upper center", fontsize="small")
    fig.tight_layout()
    fig.savefig(out_png, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return out_png


def _parse_times(spec, input_csv):
    if spec.strip().lower() == "last":
        table = read_table(input_csv, required=("t",))
        return [float(np.max(table["t"]))]
    return [float(s) for s in spec.split(",") if s.strip()]


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="Snapshot panels of both species from profiles.csv")
    ap.add_argument("--input", required=True, help="profiles.csv path")
    ap.add_argument("--times", required=True,
                    help="comma-separated times, or 'last' for the final "
                         "snapshot (steady-profile figure)")
    ap.add_argument("--out", required=True, help="output PNG path")
    args = ap.parse_args(argv)
    try:
        times = _parse_times(args.times, args.input)
        plot_profiles(args.input, times, args.out)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
