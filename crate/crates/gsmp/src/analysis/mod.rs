//! The GSMP to Jacobi map, resolvent functions, distances, and the
//! Killip-Simon functionals on the coefficient and spectral sides.

mod distance;
mod ks;
mod lanczos;
mod spectral;

pub use crate::flow::JacobiWindow;
pub use distance::{dist_eta, dist_to_isospectral, torus_jacobi_samples};
pub use ks::{
    coefficient_families, hs_column, hs_residual_report, ks_delta, ks_delta_from, ks_flow_series,
    ks_functional_h, ks_functional_h_blocks, ks_summand, FlowKsSeries, GrowthFit, KsReport,
    PartialSums, BOUNDED_GROWTH, NEGLIGIBLE_TOTAL, FAMILY_NAMES, GROWTH_TAIL,
};
pub use lanczos::{lanczos, lanczos_f, resolvent_r_gsmp, resolvent_r_jacobi, ResolventValue, Side};
pub use spectral::{
    cauchy_determinant_check, cauchy_determinant_formula, ks_spectral_side, ks_spectral_side_excluding, matrix_density_check,
    spectral_data_gsmp, spectral_data_jacobi, DensityCheck, SpectralData, SpectralSide, AC_NODES,
};
