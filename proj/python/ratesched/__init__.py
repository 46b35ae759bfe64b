"""Utility-maximizing rate scheduling for processor-sharing queues in a
Markov-switching environment: capacity regions, the KKT allocator, the dual
cost fixed point, event-driven queue simulation, and the reflected limit
diffusion."""

from ._ratesched import (
    Allocation,
    CapacityRegion,
    EnvGenerator,
    EnvPath,
    FixedPoint,
    RdrsPath,
    SystemTrajectory,
    UtilityFamily,
    allocate,
    balanced_point,
    balanced_points,
    bc_region,
    build_generator,
    duality_roundtrip,
    ellipsoid_region,
    facet_count,
    fixed_point,
    interior_facet_count,
    lift_to_queues,
    linear_log_utility,
    lyapunov,
    mac_boundary_point,
    mac_region,
    maxweight_rate,
    mimo_mac_region,
    power_utility,
    sample_path,
    scale_holding,
    simplex_region,
    simulate,
    simulate_rdrs,
    stationary_distribution,
    sum_capacity,
    total_cost,
    weighted_sum_rate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = getattr(__import__("ratesched._ratesched", fromlist=["__version__"]), "__version__", "dev")
