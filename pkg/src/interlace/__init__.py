"""Simulator and discrete potential theory toolkit for the random
interlacement set on the integer lattice in three or more dimensions.

Layers, bottom up: lattice geometry and walk kernels, the walk Green
function with a disk cache, equilibrium measures and capacity, hitting
probability oracles, the Poisson trajectory-cloud sampler with nested
level thinning, chemical-distance searches and trajectory-chain graphs,
and config-driven experiments with CSV results and named checks.
"""

from ._version import __version__
from .chemdist import (
    DistanceMap,
    SiteSet,
    TrajectoryGraph,
    ball,
    bfs_distance,
    graph_diameter,
    ray_scan,
    switch_distance,
    switch_stage_count,
    trajectory_graph,
)
from .equilibrium import (
    CapacityEstimate,
    EquilibriumSolution,
    capacity_mc,
    capacity_of,
    equilibrium,
)
from .errors import (
    ClobberError,
    ConfigError,
    InterlaceError,
    MixedConfigError,
    NotConnectedError,
    NotInSetError,
    OutOfRangeError,
    SlabBudgetError,
    SparseRangeError,
)
from .experiments import EXPERIMENT_KINDS, run_experiment
from .green import (
    GreenTable,
    green_extrapolated,
    green_inf,
    green_stopped,
    sphere_green_max,
)
from .hitting import HitBounds, hit_prob_chain, hit_prob_exact, hit_sandwich
from .lattice import (
    Box,
    Domain,
    box_domain,
    norm,
    sausage,
    segment,
    torus_distance,
    torus_wrap,
)
from .rng import stream
from .sampler import (
    OccupancyField,
    sample_count,
    sample_field,
    vacancy_check,
)
from .walk import (
    StoppedPath,
    direction_deltas,
    multi_range_stats,
    run_until,
    sample_range_paths,
)

__all__ = [
    "__version__",
    "ball",
    "bfs_distance",
    "box_domain",
    "capacity_mc",
    "capacity_of",
    "direction_deltas",
    "equilibrium",
    "graph_diameter",
    "green_extrapolated",
    "green_inf",
    "green_stopped",
    "hit_prob_chain",
    "hit_prob_exact",
    "hit_sandwich",
    "multi_range_stats",
    "norm",
    "ray_scan",
    "run_experiment",
    "run_until",
    "sample_count",
    "sample_field",
    "sample_range_paths",
    "sausage",
    "segment",
    "sphere_green_max",
    "stream",
    "switch_distance",
    "switch_stage_count",
    "torus_distance",
    "torus_wrap",
    "trajectory_graph",
    "vacancy_check",
    "Box",
    "CapacityEstimate",
    "ClobberError",
    "ConfigError",
    "DistanceMap",
    "Domain",
    "EXPERIMENT_KINDS",
    "EquilibriumSolution",
    "GreenTable",
    "HitBounds",
    "InterlaceError",
    "MixedConfigError",
    "NotConnectedError",
    "NotInSetError",
    "OccupancyField",
    "OutOfRangeError",
    "SiteSet",
    "SlabBudgetError",
    "SparseRangeError",
    "StoppedPath",
    "TrajectoryGraph",
]
