"""Post-hoc figures from vesicleflow CSV outputs.

The scripts read only the documented CSV files (profiles.csv, pools.csv,
convergence.csv) and never import the solver, so either package can be
installed and tested without the other.
"""

__all__ = ["SchemaError"]


class SchemaError(ValueError):
    """An input CSV does not match the documented schema."""
