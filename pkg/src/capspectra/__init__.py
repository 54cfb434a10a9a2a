"""Eigenvalue and torsion comparison checks for spherical-cap models.

Numerical routines for first Dirichlet eigenpairs of polar caps,
decreasing rearrangements, reverse Holder (Chiti-type) comparisons, and
Saint-Venant torsion bounds on 2-sphere domains, plus a CLI that emits
deterministic verification reports.
"""

from .cap_spectral import (
    CapEigenpair,
    NoZeroBeforeAntipodeError,
    RadialProfile,
    cap_eigenvalue,
    cap_radius_from_eigenvalue,
    profile_lp_norm,
    shoot,
    volume_profile,
)
from .chiti import (
    ComparisonPair,
    VerificationReport,
    bessel_first_zero,
    bessel_j,
    chiti_constant_euclidean,
    crossing_points,
    flat_limit_consistency,
    normalize_pair,
    resolve_tolerances,
    reverse_holder_check,
)
from .domain_solver import (
    DomainMesh,
    DomainSpec,
    DomainSpecError,
    ScalarField,
    build_mesh,
    dirichlet_energy,
    domain_from_json,
    isoperimetric_check,
    measured_samples,
    solve_dirichlet_eigenpair,
    solve_torsion,
)
from .rearrangement import (
    MeasuredSamples,
    RearrangedProfile,
    decreasing_rearrangement,
    distribution_function,
    integro_differential_residual,
    lp_norm_rearranged,
    merge_plateaus,
    radialize,
)
from .sphere_geometry import (
    Admissibility,
    ManifoldSpec,
    cap_boundary_area,
    cap_volume,
    radius_from_volume,
    unit_sphere_measure,
)
from .torsion import (
    TorsionCapProfile,
    TorsionField,
    cap_torsion_profile,
    cap_torsional_rigidity,
    saint_venant_check,
    torsional_rigidity_from_field,
    warping_comparison_check,
    warping_derivative_bound_check,
)

__version__ = "0.1.0"
