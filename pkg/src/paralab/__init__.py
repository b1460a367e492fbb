"""paralab: a numerical laboratory for matrix-valued martingale paraproducts.

Step functions on a finite d-adic lattice carry m x m complex matrix
values; the package realizes the paraproduct operator zoo on them,
verifies the exact identities the operators satisfy, computes the
associated oscillation/square-function norms, and runs seeded
optimization experiments on operator-norm ratios.
"""

__version__ = "0.1.0"

from .lattice import Interval, Lattice, build_lattice
from .ncmat import herm_eig, matrix_abs_power, psd_min_eig, schatten_norm
from .stepfn import (
    HaarCoefficients,
    StepFunction,
    cond_expect,
    constant,
    haar_analyze,
    haar_function,
    haar_synthesize,
    hs_inner,
    mart_diff,
    multiply,
    pair_scalar,
    pointwise_adjoint,
)
from .paraproducts import (
    Adjoint,
    Commutator,
    Compose,
    Identity,
    Lambda,
    LeftMult,
    OperatorSpec,
    Pi,
    PiStar,
    R,
    Scale,
    Sum,
    Theta,
    apply_operator,
    assemble,
    commutator_pi_mult,
    dk_product_expansion,
    lambda_op,
    parse_operator,
    pi,
    pi_star,
    r_op,
    theta,
    v_ab,
    w_afg,
    w_cond_closed,
)
from .norms import (
    bmo_M,
    bmo_column,
    bmo_cr,
    bmo_row,
    bmo_so,
    cond_square_fn,
    h1max_norm,
    hpc_norm,
    lp_norm,
    square_fn,
)
from .opnorm import (
    OpNormResult,
    RatioWitness,
    SearchParams,
    commutator_ratio_scan,
    katz_scan,
    l2_opnorm,
    l2_opnorm_result,
    lp_opnorm_lower,
)
from .sampling import random_step_function
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    run_experiment,
    run_identity_suite,
    run_norm_suite,
    run_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
