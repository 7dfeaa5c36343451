"""Warped G2-structures over SU(3) backgrounds: torsion, Laplacian, coflow and solitons."""

__version__ = "0.1.0"

from .errors import WarpedG2Error  # noqa: E402
from .numerics import Grid, StepControl, Topology, integrate_ode  # noqa: E402
from .geometry import (  # noqa: E402
    SU3Background,
    TorsionABC,
    WarpedProfile,
    compute_abc,
    conformal_transform,
    full_torsion,
    gauge_fix_gamma,
    reconstruct_profile,
    torsion_class,
    torsion_components,
)
from .laplacian import g2_decompose, laplacian_g2_decomp, laplacian_phi  # noqa: E402
from .flow import FlowParams, FlowState, evolve, flow_rhs, separable_cy  # noqa: E402
from .soliton import (  # noqa: E402
    CYFamily,
    SolitonParams,
    SolitonState,
    cy_closed_form,
    nk_constant_catalog,
    solve_soliton_bvp,
)

__all__ = [
    "__version__",
    "WarpedG2Error",
    "Grid",
    "StepControl",
    "Topology",
    "integrate_ode",
    "SU3Background",
    "TorsionABC",
    "WarpedProfile",
    "compute_abc",
    "conformal_transform",
    "full_torsion",
    "gauge_fix_gamma",
    "reconstruct_profile",
    "torsion_class",
    "torsion_components",
    "g2_decompose",
    "laplacian_g2_decomp",
    "laplacian_phi",
    "FlowParams",
    "FlowState",
    "evolve",
    "flow_rhs",
    "separable_cy",
    "CYFamily",
    "SolitonParams",
    "SolitonState",
    "cy_closed_form",
    "nk_constant_catalog",
    "solve_soliton_bvp",
]
