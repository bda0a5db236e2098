"""foloc: forced-oscillation source localization from generator-only measurements.

Workflow: load a grid case, reduce it to the generator subnetwork, learn the
generator inertia/damping from ambient data, then scan a Gaussian
log-likelihood over every (source bus, frequency bin) hypothesis of a forced
oscillation.  A swing-dynamics simulator generates all synthetic data.
"""

__version__ = "0.1.0"

from .grid_model import Bus, GridCase, LaplacianBlocks, Line, build_laplacian, load_case
from .reduction import (
    ReducedModel,
    degeneracy_groups,
    forcing_gain,
    kron_reduce,
    natural_modes,
    noise_covariance,
    reduce_case,
)
from .simulator import (
    DynParams,
    ForcingSpec,
    Trajectory,
    read_trajectory,
    simulate_full_dae,
    simulate_reduced,
    write_trajectory,
)

__all__ = [
    "Bus",
    "DynParams",
    "ForcingSpec",
    "GridCase",
    "LaplacianBlocks",
    "Line",
    "ReducedModel",
    "Trajectory",
    "build_laplacian",
    "degeneracy_groups",
    "forcing_gain",
    "kron_reduce",
    "load_case",
    "natural_modes",
    "noise_covariance",
    "read_trajectory",
    "reduce_case",
    "simulate_full_dae",
    "simulate_reduced",
    "write_trajectory",
    "__version__",
]
