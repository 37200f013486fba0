"""Pseudo-spectral solver and estimate laboratory for the quadratic
Schrodinger equation i u_t + Lap u = |u|^2 on the (possibly anisotropic)
2-torus."""

from .classify import CaseTag, EstimateParams, classify_interaction, near_orthogonality_check
from .fields import (
    SpaceGrid,
    SpacetimeField,
    SpatialField,
    TimeWindow,
    free_orbit,
    free_propagate,
    product_field,
    random_block_field,
    to_fourier,
    to_physical,
)
from .lattice import (
    CountingInstance,
    DyadicTriple,
    FreqVec,
    InteractionTriple,
    TorusGeometry,
    counting_bound,
    counting_count,
    dyadic_block_of,
    modulation_block_of,
    phase_sum,
    sector_index,
)
from .norms import CutoffProfile, XsbParams, lp_spacetime_norm, xsb_norm, xsb_restriction_norm_ub
from .picard import PicardConfig, picard_iterate
from .probes import (
    ResonantFiberSpec,
    bilinear_strichartz_ratio,
    bilinear_xsb_ratio,
    dual_trilinear_form,
    high_modulation_ratio,
    low_modulation_ratio,
    resonant_fiber_size,
    trilinear_form,
)
from .solver import (
    SolverConfig,
    Trajectory,
    blowup_criterion,
    evolve,
    mean_derivative_check,
    mean_ode_oracle,
    nonlinear_substep_exact,
    strang_step,
)

__version__ = "0.1.0"
