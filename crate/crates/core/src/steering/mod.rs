//! Contrastive steering vectors, the α → confidence transfer function and
//! per-question adaptive steering plans.

mod plan;
mod transfer;
mod vector;

pub use plan::{calibrated_target, plan_adaptive, PlanEntry, SteeringPlan};
pub(crate) use transfer::csv_err;
pub use transfer::{
    aggregate_sweep, coarse_alpha_grid, default_alpha_grid, fit_transfer, read_sweep_csv, write_sweep_csv, SweepRecord,
    TransferFunction,
};
pub use vector::{
    apply_steering, build_caa, load_steering_vector, prepare_direction, save_steering_vector, SteeringVector,
    SteeringVectorFile, DEFAULT_TAU_HI, DEFAULT_TAU_LO,
};
