"""fbx: numerical laboratory for a two-phase singular free boundary problem.

The package minimizes the energy |grad u|^2 + 2*lp*(u+)^p + 2*lm*(u-)^p over
fields on the half-disk that vanish on the flat boundary, extracts and
classifies the resulting free boundary, and measures the quantitative
properties the underlying theory predicts (growth exponent, non-degeneracy,
Weiss monotonicity, homogeneous blow-up profiles, tangential contact with the
fixed boundary).
"""

__version__ = "0.1.0"

from .domain import (
    DomainSpec,
    Grid,
    Mask,
    SpacingTooCoarseError,
    ball_mask,
    boundary_nodes,
    build_grid,
    load_grid,
    save_grid,
)
from .energy import (
    EnergyParams,
    ScalarField,
    beta_of,
    dirichlet_graph_energy,
    el_residual,
    harmonic_replacement,
    load_field,
    potential,
    save_field,
    smoothed_potential,
    total_energy,
)
from .freeboundary import (
    BRANCHING,
    NEG_ONE_PHASE,
    POS_ONE_PHASE,
    TWO_PHASE,
    ConeSpec,
    FreeBoundary,
    NotAFreeBoundaryPointError,
    boundary_from_json,
    boundary_to_json,
    classify_point,
    cone_check,
    extract_free_boundary,
    normal_at,
    tangency_profile,
)
from .analysis import (
    AngularProfile,
    BlowupSequence,
    GrowthFit,
    NondegReport,
    WeissSeries,
    angular_profile,
    blowup,
    blowup_sequence,
    campanato_rate,
    growth_fit,
    halfplane_constant,
    halfplane_profile,
    match_profile,
    nondeg_check,
    nondeg_floor,
    subharmonic_witness,
    weiss,
    weiss_series,
)
from .minimize import (
    BoundaryData,
    MinimizeReport,
    Schedule,
    competitor_gap,
    default_schedule,
    harmonic_extension,
    minimize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
