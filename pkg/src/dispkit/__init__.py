"""Dispersion of point sets: exact oracles, approximation nets, bounds and experiments."""

from .bounds import (
    BoundValue,
    best_known_upper,
    k_unb_failure_bound,
    large_eps_bounds,
    lemma_k_unb_bound,
    lemma_unb_bound,
    lower_bounds,
    regime,
    rz_cover_bound,
    theta_m_bound,
    thm_k_bound,
    thm_main_bound,
    thm_torus_bound,
)
from .core import AxisBox, DimensionError, NetParams, PeriodicBox, PointSet, box_contains, box_volume
from .exact import (
    DispersionResult,
    InstanceTooLarge,
    brute_force_oracle,
    dispersion_exact,
    k_dispersion_exact,
    torus_dispersion_exact,
)
from .montecarlo import (
    TrialRecord,
    TrialReport,
    empirical_inverse,
    run_dispersion_experiment,
    run_net_experiment,
    sample_uniform,
)
from .nets import (
    ApproximationNet,
    NetTooLarge,
    SimplexCover,
    build_anchored_net,
    build_general_net,
    build_net,
    build_simplex_cover,
    build_torus_net,
    net_certifies,
    shift_lattice,
    verify_approximation,
)

__version__ = "0.1.0"
