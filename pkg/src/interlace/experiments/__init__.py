"""Config-driven experiments over the sampler and distance machinery.

Each module in this package is one experiment kind with a SCHEMA and the
replica protocol the runner drives; results land as CSV records plus
named pass/fail checks in a summary.
"""

from .runner import EXPERIMENT_KINDS, load_experiment, run_experiment, schemas

__all__ = ["EXPERIMENT_KINDS", "load_experiment", "run_experiment", "schemas"]
