"""Numerical laboratory for line defects of cone-valued minimizers on a cubic grid."""
from .cone import APEX, ConeParams, ConePoint, cone_distance, cylindrical_oracle, project_to_cone
from .grid import Grid, LineField, gauge_aligned_gradient, load_snapshot, sample_field, save_snapshot
from .energy import EnergyTrace, PotentialSpec, discrete_energy, euler_lagrange_residual, relax, relax_multilevel
from .monotonicity import (
    ClassicalRecord,
    CutoffProfile,
    FrequencyRecord,
    classical_quantities,
    local_bounds_check,
    pinching,
    smoothed_quantities,
    verify_identities,
)
from .weiss import WeissReport, classical_weiss, pinching_bound_eval, pinching_scales, weiss_deficit
from .defects import (
    ZeroSet,
    annulus_lengths,
    arc_length,
    extract_zero_set,
    frequency_along_defect,
    geometric_ratio,
    link_curves,
    minkowski_content,
    tube_confinement_check,
)
from .jones import BetaResult, DiscreteMeasure, beta2, distortion_check, eigh_sym3, reifenberg_hypothesis
from .cover import CoverTree, audit_coverage, audit_vitali, build_cover, packing_measure
from .config import RunConfig, load_config, make_config
from .cli import run

__version__ = "0.1.0"
