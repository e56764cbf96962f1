"""Multicomponent coagulation with a bilinear collision kernel.

Three independent routes to the pre-gel cluster-size distribution (a
truncated ODE system, an exact combinatorial formula through a branching
process, and direct Monte Carlo on that process), a spectral formula for
the gelation time, and a convex rate-function minimization that finds
the composition direction along which large clusters concentrate.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    CoagulationError,
    ConvergenceError,
    CriticalityError,
    HypothesisError,
    IntegrationError,
    NumericalBreakdownError,
    SpecValidationError,
)
from .model import (
    Composition,
    ModelSpec,
    SizeDistribution,
    ValidationReport,
    as_composition,
    borel_oracle,
    composition_size,
    compositions_up_to,
    kernel,
    mass_vector,
    sorted_items,
    validate,
    write_distribution_csv,
)
from .pgf import (
    BlockCriticality,
    FixedPointResult,
    GelationReport,
    gelation_time,
    offspring_pgf,
    pde_residual,
    solve_fixed_point,
    spectral_value,
)
from .analytic import (
    MinorTable,
    ProgenyValue,
    minor_table,
    poisson_rates,
    progeny_pmf,
    progeny_pmf_detail,
    series_oracle,
    solve,
    solve_detail,
    solve_log,
    solve_window,
)
from .ode import (
    OdeConfig,
    OdeSnapshot,
    TruncationWindow,
    derivative,
    integrate,
    mass_loss_curve,
)
from .branching_mc import (
    McConfig,
    McPmfEstimate,
    ProgenySample,
    estimate_pmf,
    sample_progeny,
    sample_progeny_batch,
)
from .localization import (
    LocalizationResult,
    RateSequence,
    as_simplex_point,
    empirical_rate,
    gamma,
    gamma_gradient,
    minimize_gamma,
    sigma,
)

__all__ = [
    "__version__",
    "CoagulationError",
    "ConvergenceError",
    "CriticalityError",
    "HypothesisError",
    "IntegrationError",
    "NumericalBreakdownError",
    "SpecValidationError",
    "Composition",
    "ModelSpec",
    "SizeDistribution",
    "ValidationReport",
    "as_composition",
    "borel_oracle",
    "composition_size",
    "compositions_up_to",
    "kernel",
    "mass_vector",
    "sorted_items",
    "validate",
    "write_distribution_csv",
    "BlockCriticality",
    "FixedPointResult",
    "GelationReport",
    "gelation_time",
    "offspring_pgf",
    "pde_residual",
    "solve_fixed_point",
    "spectral_value",
    "MinorTable",
    "ProgenyValue",
    "minor_table",
    "poisson_rates",
    "progeny_pmf",
    "progeny_pmf_detail",
    "series_oracle",
    "solve",
    "solve_detail",
    "solve_log",
    "solve_window",
    "OdeConfig",
    "OdeSnapshot",
    "TruncationWindow",
    "derivative",
    "integrate",
    "mass_loss_curve",
    "McConfig",
    "McPmfEstimate",
    "ProgenySample",
    "estimate_pmf",
    "sample_progeny",
    "sample_progeny_batch",
    "LocalizationResult",
    "RateSequence",
    "as_simplex_point",
    "empirical_rate",
    "gamma",
    "gamma_gradient",
    "minimize_gamma",
    "sigma",
]
