"""Numerics for best constants of fractional p-Poincare inequalities.

Pipeline: product domains and tensor grids (`domain`), exterior kernel
weights for the zero-extension energy (`exterior`), discrete Gagliardo
energy assembly and evaluation (`assembly`), Rayleigh-quotient
minimization (`solver`), and reproducible theorem-verification
experiments (`experiments`) driven by the `fracpoincare` CLI (`cli`).
"""

from .special import (
    FracParams,
    beta,
    cos_power_integral,
    gamma,
    kernel_constant,
    log_gamma,
    reduction_constant,
    sphere_area,
    surface_element,
)
from .domain import DomainSpec, Grid, GridFunction, build_grid, cylinder, dilate
from .exterior import exterior_kernel_weight, exterior_kernel_weight_quadrature
from .assembly import (
    AssemblyConfig,
    NonlocalOperator,
    ResourceError,
    SeminormKind,
    assemble,
    directional_decomposition,
    dump_operator,
    energy,
    energy_gradient,
    load_operator,
    lp_norm_p,
    rayleigh,
)
from .solver import (
    EigenResult,
    SeparableBound,
    SolverConfig,
    check_first_eigen_properties,
    cutoff_seminorm,
    separable_upper_bound,
    solve,
)

__version__ = "0.1.0"
