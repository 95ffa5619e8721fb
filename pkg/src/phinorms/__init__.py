"""Orthonormal systems, ideal norms and type/cotype constants on finite spaces."""
from .core import (
    DimensionMismatch,
    EstimateReport,
    Field,
    FiniteNormedSpace,
    GramViolation,
    LinearMap,
    MeasureSpace,
    OrthonormalSystem,
    RankDeficient,
    adjoint,
    family_map,
    gram_schmidt,
    identity_map,
    inner_product,
    norm,
    operator_norm,
    validate_system,
)
from .stochastic import RngPolicy, gaussian_average, rademacher_average, sphere_average_identity
from .optim import OptBudget
from .idealnorms import equal_norm_pi2n, nuclear_norm_hilbert, phi_dual, phi_norm, pi2n, pi_phi
from .typecotype import c2n, cotype_const, modified_type_const, t2n, type_const
from .constructions import (
    bourgain_subset,
    bourgain_system,
    canonical_system,
    fourier_system,
    haar_random_system,
    kq_constant,
    l1_subspace_system,
    lambda2_constant,
)
from .geometry import (
    contact_measure,
    disjoint_support_extract,
    equal_norm_bucketing,
    g_double_prime_functional,
    g_prime_functional,
    greedy_coordinate_basis,
    minkowski_gauge,
    procrustes_align,
)

__version__ = "0.1.0"
