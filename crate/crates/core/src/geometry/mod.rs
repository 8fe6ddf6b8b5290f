//! Directional and subspace comparisons between the accuracy and confidence
//! representations: probe-weight cosines, group contrasts across prompt
//! conditions, deflated predictive subspaces, principal angles, CCA,
//! removal retention and variance decomposition.
//!
//! Subspace analyses work in a PCA space fitted on training rows only.

mod directions;
mod report;
mod subspace;

pub use directions::{
    contamination_curve, contrast_alignment, group_contrast, weight_cosine, ContaminationPoint, GroupLabel,
    DEFAULT_HI_QUANTILE, DEFAULT_LO_QUANTILE,
};
pub use report::{
    analyze_layer, write_contamination_csv, write_probe_cosine_csv, write_subspace_reports, GeometryConfig,
    SubspaceReport,
};
pub use subspace::{
    canonical_correlations, extract_subspace, principal_angles, principal_angles_of, random_angle_baseline,
    random_subspace, AnalysisSpace, AngleBaseline, Retention, Subspace, VarianceSplit, RETENTION_FLAG,
};
