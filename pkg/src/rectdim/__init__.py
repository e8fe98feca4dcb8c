"""Lattice box geometry, covering lemmas, and critical-dimension estimation
for non-singular product odometer actions on Z^d."""

__version__ = "0.1.0"

from .metric import (
    Profile,
    ProfileRangeError,
    Rectangle,
    RectangularMetric,
    exp_profile,
    linear_profile,
    metric_from_spec,
    power_profile,
    table_profile,
)
from .covering import (
    Carpet,
    DiscreteMassFunction,
    SizeLimitError,
    Stack,
    boundary_chain_check,
    incremental_subcarpet,
    mass_cover_selection,
    multiplicity,
    well_separated_coloring,
)
from .dynamics import (
    CylinderFunction,
    HorizonOverflowError,
    OdometerPoint,
    OdometerSystem,
    ProductSystem,
    cylinder_function,
)
from .estimator import (
    CocycleSumSeries,
    CriticalDimensionEstimate,
    binary_entropy,
    compare_growth,
    critical_dimensions,
    entropy_oracle,
    folner_ratio,
    geometric_grid,
    maximal_tail_check,
    prodcd_bounds,
    ratio_average,
    rect_log_sum,
    series,
    stansym_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
