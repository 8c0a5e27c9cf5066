"""Schema-checked CSV loading shared by the figure scripts."""

import csv

import numpy as np

from . import SchemaError

# fixed so identical inputs reproduce identical PNG bytes
PNG_METADATA = {"Software": "vesicleflow-plots"}


def read_table(path, required):
    """Load a CSV into a dict of float columns, verifying `required` names.

    Empty fields become NaN (the last convergence row has no observed
    order).  Raises SchemaError naming the first missing column or the
    first unparsable cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r} "
                                  f"(found {header})")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    table = {}
    for col in header:
        values = np.empty(len(rows))
        for i, row in enumerate(rows):
            cell = (row[col] or "").strip()
            if not cell:
                values[i] = np.nan
                continue
            try:
                values[i] = float(cell)
            except ValueError:
                raise SchemaError(
                    f"{path}: column {col!r} row {i + 2}: "
                    f"cannot parse {cell!r} as a number") from None
        table[col] = values
    return table
