"""Extreme statistics of non-intersecting Brownian paths.

Exact finite-N laws of the maximum of the top path and of the location
where it is attained, for three ensembles (plain bridges, excursions,
reflected bridges), together with their Tracy-Widom edge scaling limit
and Monte Carlo reference samplers.  See the README for the command line
interface built on the same functions.
"""

from ._errors import (
    InvalidArgumentError,
    NibmError,
    PrecisionWindowError,
    QuadratureError,
    SamplingError,
    SeriesTooSlowError,
    SingularMatrixError,
)
from .airy_limit import (
    AiryValue,
    ConvergenceReport,
    ConvergenceRow,
    FredholmGrid,
    KernelId,
    airy,
    convergence_report,
    f_goe,
    limit_joint_density,
    nystrom_matrix,
)
from .distributions import (
    ENVELOPE_RATE,
    EPSILON_LARGE,
    EPSILON_SMALL,
    JointDensityGrid,
    TailEnvelopeReport,
    argmax_marginal,
    argmax_tail,
    gue_cdf,
    gue_tail_neglog,
    joint_density,
    joint_density_grid,
    loe_cdf,
    max_cdf,
    tail_envelope_report,
)
from .finite_kernels import (
    ModelKind,
    OperatorMatrix,
    PsiPair,
    build_gue_projection,
    build_operator,
    build_psi_pair,
)
from .hermite import (
    HermiteEval,
    gue_projection_entry,
    hermite_eval,
    hermite_kernel_identity_residual,
    overlap_reflect,
    phi,
    phi_prime,
)
from .montecarlo import (
    PathEnsembleSample,
    ecdf_ks,
    rng_stream,
    sample_bridge,
    sample_dyson_bridge,
    sample_excursion,
    sample_reflected_bridge,
    sample_wishart_max,
)
from .numerics import (
    QuadratureRule,
    ScaledReal,
    SquareMatrix,
    det_lu,
    gauss_hermite,
    gauss_legendre_mapped,
    solve,
    sym_eigen,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "NibmError",
    "InvalidArgumentError",
    "SingularMatrixError",
    "SeriesTooSlowError",
    "PrecisionWindowError",
    "QuadratureError",
    "SamplingError",
    "ScaledReal",
    "QuadratureRule",
    "SquareMatrix",
    "det_lu",
    "solve",
    "sym_eigen",
    "gauss_hermite",
    "gauss_legendre_mapped",
    "HermiteEval",
    "phi",
    "phi_prime",
    "hermite_eval",
    "overlap_reflect",
    "gue_projection_entry",
    "hermite_kernel_identity_residual",
    "ModelKind",
    "OperatorMatrix",
    "PsiPair",
    "build_operator",
    "build_gue_projection",
    "build_psi_pair",
    "max_cdf",
    "loe_cdf",
    "gue_cdf",
    "gue_tail_neglog",
    "joint_density",
    "joint_density_grid",
    "argmax_marginal",
    "argmax_tail",
    "tail_envelope_report",
    "JointDensityGrid",
    "TailEnvelopeReport",
    "ENVELOPE_RATE",
    "EPSILON_SMALL",
    "EPSILON_LARGE",
    "AiryValue",
    "KernelId",
    "FredholmGrid",
    "ConvergenceRow",
    "ConvergenceReport",
    "airy",
    "nystrom_matrix",
    "f_goe",
    "limit_joint_density",
    "convergence_report",
    "PathEnsembleSample",
    "rng_stream",
    "sample_wishart_max",
    "sample_dyson_bridge",
    "sample_bridge",
    "sample_reflected_bridge",
    "sample_excursion",
    "ecdf_ks",
]
