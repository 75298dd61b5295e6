"""Numerical laboratory for damping of the incoherent state in the mean-field
Kuramoto ensemble.

Modules by concern:

* ``distributions`` - frequency densities g(omega): values, derivatives,
  Fourier transforms, moments, Sobolev norms, quadrature grids.
* ``dispersion`` - stability of the incoherent state: dispersion function,
  boundary criterion, winding-number index, critical couplings, unstable
  roots.
* ``volterra`` - the memory-kernel equation of the linearized order
  parameter: product-trapezoidal marching, decay fits, stability-constant
  measurements, exponential-growth witnesses.
* ``spectral`` - nonlinear pseudo-spectral simulation of the perturbation:
  theta modes on a frequency grid, exact free transport, Sobolev
  diagnostics, scattering profiles, echo horizons.
* ``finiten`` - direct integration of the N-oscillator system for
  continuum comparison.
* ``cli`` - config-driven experiment runner (``kuramoto-damping``).
"""

from .distributions import (
    Cauchy,
    FrequencyDistribution,
    Gaussian,
    Mixture,
    QuadratureGrid,
    bi_cauchy,
    build_grid,
    distribution_from_config,
    distribution_to_config,
    fourier_moment,
    sobolev_norm,
)
from .dispersion import (
    DispersionRelation,
    StabilityReport,
    analyze_stability,
    boundary_values,
    critical_coupling,
    find_unstable_root,
    l1_sufficient_check,
    winding_number,
)
from .volterra import (
    DecayFit,
    VolterraProblem,
    VolterraSolution,
    empirical_stability_constant,
    fit_decay,
    instability_witness,
    kuramoto_kernel,
    linear_input_from_initial_data,
    mode_input_from_grid,
    solve,
)
from .spectral import (
    SimResult,
    SpectralState,
    initialize,
    order_parameter,
    recurrence_horizon,
    rhs,
    run,
    scattering_profile,
    sobolev_diagnostics,
    step,
)
from .finiten import (
    FiniteNState,
    order_parameter_n,
    sample_oscillators,
    simulate,
    step_rk4,
)

__version__ = "0.1.0"
