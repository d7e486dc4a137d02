"""Entanglement and discord quantifiers computed as constrained minimizations.

States are :class:`DensityMatrix` objects on labelled layouts. Every search
returns a :class:`MeasureReport` with the value, a certificate (the optimizer's
witness) and convergence diagnostics.
"""
from .errors import QCorrError
from .extensions import (
    ExtensionParams,
    extend,
    flag_extension,
    gdse,
    midse,
    min_discord_over_extensions,
    pt_gdse,
    pt_midse,
)
from .geometry import (
    PinchingMap,
    bures_distance,
    bures_distance_sq,
    fidelity,
    pinch,
    relative_entropy,
    relent_cq_decomposition,
)
from .measures import (
    Side,
    bures_discord,
    bures_entanglement,
    convex_roof_bures,
    pure_bures_entanglement,
    relent_discord,
    relent_discord_via_cq,
    relent_entanglement,
)
from .optimize import MeasureReport, OptimizerConfig, closest_cc, closest_cq, closest_separable
from .qsd import DiscriminationEnsemble, ensemble_from_extension, helstrom_two_state, optimal_success_vn, verify_corollary
from .states import (
    DensityMatrix,
    Ensemble,
    SeparableAnsatz,
    SubsystemLayout,
    bell,
    is_cc,
    is_cq,
    is_ppt,
    load_state,
    make_cc,
    make_cq,
    random_density,
    random_pure,
    save_state,
    werner,
)

__version__ = "0.1.0"
