"""afwave: a desk-scale numerical laboratory for the defocusing quintic wave
equation  d_a(g^{ab} d_b u) = u^5  on asymptotically flat perturbations of
Minkowski space.

Modules
-------
metric      perturbation families g = m + h and their decay validation
field       grids, scalar fields, discrete calculus, single-time norms
evolve      RK4 evolution, the linear propagator S(t, s), Duhamel sums
norms       spacetime norms, energies, partitioning, the explicit bound
morawetz    interaction functionals, derivative ledger, quiet-time search
dispersive  decay-exponent fits and scalar quadrature oracles
cli         config-driven orchestration and report emission
"""

__version__ = "0.1.0"

from .field import (
    Grid3,
    ScalarField,
    StateSlice,
    gaussian_bump,
    gradient,
    lebesgue_norm,
    power_tail,
    read_state,
    rotation_derivative,
    sobolev_norm,
    write_state,
    zero_field,
)
from .metric import (
    MetricFamily,
    MetricSample,
    MetricSpec,
    incoming_null_contraction,
    sample_metric,
    validate_assumptions,
)
from .evolve import (
    SimConfig,
    Trajectory,
    duhamel_integral,
    evolve,
    propagate_linear,
    rhs,
    timestep,
)
from .norms import (
    BoundInputs,
    MixedNormSpec,
    energy_density,
    high_order_energy,
    iled_ratio,
    le1_norm,
    le_star_norm,
    mixed_norm,
    partition_by_l8,
    theorem_bound,
    total_energy,
)
from .morawetz import (
    MorawetzConfig,
    averaged_morawetz,
    cutoff,
    ledger,
    main_density,
    morawetz_potential,
    potential_bound,
    quiet_time_search,
)
from .dispersive import (
    DecayFit,
    dispersive_decay_fit,
    holder_tail_oracle,
    interior_decay_experiment,
    kernel_integral_oracle,
    remote_past_term,
    source_decay_check,
)
