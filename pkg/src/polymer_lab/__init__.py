"""Numerical laboratory for full-space and half-space log-gamma directed polymers."""

from .polymer_core import (
    Endpoint,
    LogPartitionTable,
    Mode,
    Parallelogram,
    Variant,
    log_partition,
    log_partition_flagged,
    log_partition_inhom,
    log_partition_parallelogram,
    log_partition_table,
    log_point_to_line,
)
from .sampling import (
    Geometry,
    PolymerParams,
    SeedSpec,
    Stream,
    WeightField,
    build_coupled_fields,
    build_field,
    build_inhomogeneous_field,
    sample_inverse_gamma,
    sample_log_inverse_gamma,
)
from .scaling import ContinuumPoint, HVariant, ScalingFrame, h_scaled, lattice_coords, shape_inequality_margin
from .shape_function import ShapeContext, f_prime, f_slope, f_two, g, g_inverse, shape_F
from .special_functions import digamma, log_gamma, polygamma, tetragamma, trigamma

__version__ = "0.1.0"
