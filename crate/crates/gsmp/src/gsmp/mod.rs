//! GSMP block matrices: blocks and windows, the Lambda functionals,
//! Blaschke-Potapov transfer matrices, local resolvents, `V(A)` and Floquet
//! fibers.

mod blocks;
mod fiber;
mod lambda;
mod resolvent;
mod transfer;
mod vofa;

pub use blocks::{assemble_window, build_blocks, GsmpBlockPair, GsmpWindow};
pub(crate) use blocks::b_entry;
pub use fiber::{
    fiber_band_edges, fiber_magic_check, fiber_magic_deviation, fiber_spectrum, floquet_fiber,
    theta_grid,
};
pub use lambda::{
    bp_factor_finite, bp_factor_infinity, check_gsmp_class, lambda_all, lambda_iso,
    lambda_iso_grad, lambda_sharp, ClassReport,
};
pub use resolvent::{
    last_index_closed_form, resolvent_apply_local, resolvent_column_closed_form, SparseColumn,
    CLASS_MARGIN,
};
pub use transfer::{
    c0_of_pair, numeric_residue, q_g_alternative, residue_consistency, residue_lambda,
    trace_is_potential, transfer_matrix,
};
pub use vofa::{
    assemble_v_of_a, block_decompose_v, magic_residual, BlockDecomposition, MagicResidual, VOfA,
};
