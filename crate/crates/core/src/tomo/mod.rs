//! Conditional fragment tomography.

mod basis;
mod dataset;
mod fit;

pub use basis::{
    dual_basis, dual_basis_pinv, measurement_element, noisy_measurement_element, TomoBasis,
    MAX_FRAME_CONDITION,
};
pub use dataset::{
    collect_fragment_data, collect_fragment_data_bounded, exact_conditional_tensors,
    probabilities_from_tensors, ConditionalDataset, Shots, DEFAULT_MAX_CUT_WIRES,
};
pub use fit::{
    conditioning_mixing, fit, fit_cls, fit_cls_block, fit_lin, fit_lin_block, fit_lin_raw,
    fit_memcls, rescale_eigenvalues, AffineConstraint, ClsOptions, FitDiagnostics, FitResult,
    Fitter, Weighting,
};
