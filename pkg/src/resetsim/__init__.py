"""Simulation and optimal control of dissipative qubit reset in the spin-boson
model, beyond the Born-Markov approximation.

The package is organised around a reusable process tensor: a matrix-product
compression of the discrete-time influence functional for a fixed bath and
time grid.  Contracting it with per-step system propagators yields the open
dynamics for arbitrary frequency protocols; an adjoint sweep gives exact
gradients for control optimisation.  A polaron/TDVP layer reproduces and
explains the optimal-control mechanism, and small exactly-solvable models act
as independent oracles.
"""

from .bath import (
    SpectralDensity,
    DiscretizedBath,
    eval_spectral_density,
    eta_analytic,
    eta_quadrature,
    eta_blocks,
    discretize,
)
from .influence import (
    InfluenceTensors,
    ProcessTensor,
    build_influence,
    build_process_tensor,
    contract,
    save_process_tensor,
    load_process_tensor,
)
from .dynamics import (
    ControlProtocol,
    SystemState,
    TransmonSpec,
    StepPropagator,
    qubit_propagator,
    transmon_propagator,
    run_protocol,
)
from .control import (
    OptimizationResult,
    infidelity,
    gradient,
    optimize,
    power_spectrum,
)
from .polaron import (
    PolaronState,
    equilibrium_displacements,
    integrate_tdvp,
    residual_population,
    perturbative_solution,
    phase_profile,
)
from .transmon import (
    MultilevelPolaron,
    solve_multilevel_displacements,
    population_series,
    run_multilevel_reset,
)

__version__ = "0.1.0"

__all__ = [
    "SpectralDensity", "DiscretizedBath", "eval_spectral_density",
    "eta_analytic", "eta_quadrature", "eta_blocks", "discretize",
    "InfluenceTensors", "ProcessTensor", "build_influence",
    "build_process_tensor", "contract", "save_process_tensor",
    "load_process_tensor",
    "ControlProtocol", "SystemState", "TransmonSpec", "StepPropagator",
    "qubit_propagator", "transmon_propagator", "run_protocol",
    "OptimizationResult", "infidelity", "gradient", "optimize",
    "power_spectrum",
    "PolaronState", "equilibrium_displacements", "integrate_tdvp",
    "residual_population", "perturbative_solution", "phase_profile",
    "MultilevelPolaron", "solve_multilevel_displacements",
    "population_series", "run_multilevel_reset",
    "__version__",
]
