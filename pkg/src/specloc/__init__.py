"""Local topological invariants of finite tight-binding lattices via the
spectral localizer: rho-local gaps, localizer gaps, half-signature Chern
markers, kappa-admissibility bounds, tapering constants and spectral flow."""

from .anderson import (
    EnsembleSpec,
    EnsembleStats,
    expected_gap_estimate,
    rho_c_estimate,
    run_ensemble,
)
from .bounds import (
    BoundParams,
    KappaWindow,
    admissible_region_scan,
    criterion_2d,
    defect_bound,
    kappa_window_global,
    kappa_window_relative,
    pair_admissible,
)
from .flow import (
    FlowResult,
    ProbePath,
    flow_stability_check,
    kernel_locality_check,
    locate_zero_crossing,
    make_path,
    perturbation_coefficients,
    slope_bound_check,
    spectral_flow,
)
from .lattice import (
    DisorderSpec,
    Disk,
    HaldaneParams,
    HermitianOperator,
    SiteLattice,
    apply_disorder,
    build_haldane,
    build_heterostructure,
    build_ssh,
)
from .localgap import (
    LocalGapResult,
    dos_window,
    dos_window_curve,
    ldos_window,
    local_gap,
    local_gap_profile,
    weyl_bound_rhs,
)
from .localizer import (
    HALF_SIGNATURE_CHERN_SIGN,
    IndexResult,
    LocalizerMatrix,
    Probe,
    assemble,
    half_signature,
    localizer_gap,
    probe_report,
    volume_independence_check,
)
from .operators import (
    DiracOperator,
    Restriction,
    commutator_with_dirac,
    damped_norm,
    restrict,
    tapered_multiplier,
)
from .tapering import TaperingProfile, build_profile, cf_direct, cf_fourier, cf_sweep

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
