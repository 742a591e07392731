//! Bilinear Dunkl multipliers: direct quadrature, the Coifman–Meyer
//! decomposition and the trilinear kernel estimates.

pub mod cm;
pub mod direct;
pub mod kernel_bounds;
pub mod symbol;

pub use cm::{
    cm_apply, cm_apply_pruned, cm_decompose, cm_decompose_with, default_scales, Branch, CMDecomposition,
    CmOptions, ContributionPruning, Periods, Slot, SlotKind,
};
pub use direct::{bilinear_apply_direct, DirectPlan};
pub use kernel_bounds::{
    convolution_support_check, kernel_bound_report, kernel_eval, KernelEstimateReport, KernelEvaluator,
    KernelQuadrature, SampleSpec, SupportCheckReport,
};
pub use symbol::{BilinearSymbol, DerivativeAudit};
