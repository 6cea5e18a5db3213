//! Closed-form Laplace transforms and outage probabilities.

mod laplace;
mod outage;

pub use laplace::{
    inter_inner, intra_head_integral, intra_tail_integral, laplace_asymptotic, laplace_inter,
    laplace_intra, laplace_noma, laplace_total, InterLaplace, LaplaceModel, LaplaceSpec,
    ZERO_DISTANCE_FLOOR,
};
pub use outage::{
    comp_outage_with, mu, noma_outage_with, outage_comp, outage_comp_asymptotic, outage_noma,
    outage_noma_asymptotic, AnalyticModel, CompBranchChoice, NomaCaseChoice, OutageBranch,
    OutageValue, CLAMP_TOL, DEFAULT_CHEBYSHEV_N, DERIVATIVE_REL_STEP, NEAR_EQUAL_REL,
};
