//! Conditional Shapley values for tabular models through one block-structured
//! precision system.
//!
//! Each coalition `S` needs the least squares fit of the model predictions on
//! the features in `S`. Instead of refitting `2^p` regressions, every fit is
//! obtained from the full Gram matrix `Q = XᵀX` by adding a large penalty `κ`
//! to the diagonal entries of the excluded columns and solving
//! `(Q + κ·D_S) μ_S = Xᵀf`. The resulting contribution values
//! `v(S) = x*·μ_S` feed the Kernel SHAP weighted least squares system.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below name the common instantiations.

pub mod coalitions;
mod error;
pub mod linalg;
pub mod oracle;
pub mod scalar;
pub mod shapley;
pub mod solver;
pub mod sparse;
pub mod synthetic;
pub mod tabular;

pub use coalitions::{
    build_z, enumerate_all, sample_coalitions, shapley_kernel_weight, shapley_kernel_weight_anchored, Coalition,
    CoalitionPlan, MembershipMatrix, PlanMode, DEFAULT_ANCHOR_WEIGHT, DEFAULT_EXHAUSTIVE_CAP,
};
pub use error::{Error, Result};
pub use oracle::{explain_exact, fit_plan_exact, fit_subset_ols, sequential_refit, ExactFits, SubsetFit};
pub use scalar::Scalar;
pub use shapley::{
    explain_batch, explain_encoded, solve_kernel_shap, ContributionSource, KernelShapSystem, RowExplanation,
    ShapleyResult,
};
pub use solver::{
    build_mask, contributions, kappa_default, kappa_with_multiplier, solve_coalition, solve_plan_chunked, Assembly,
    CoefficientSet, ConstraintMask, ContributionVector, SolveStats, SolverConfig, DEFAULT_CHUNK_SIZE,
    DEFAULT_KAPPA_MULTIPLIER,
};
pub use tabular::{
    build_design, compute_gram, encode_row, infer_schema, load_predictions, load_table, ColumnMap, DesignMatrix,
    Feature, FeatureKind, FeatureSchema, FeatureValue, GramSystem, SchemaHints, Table,
};

pub type DesignMatrix64 = DesignMatrix<f64>;
pub type GramSystem64 = GramSystem<f64>;
pub type CoalitionPlan64 = CoalitionPlan<f64>;
pub type CoefficientSet64 = CoefficientSet<f64>;
pub type ContributionVector64 = ContributionVector<f64>;
pub type ShapleyResult64 = ShapleyResult<f64>;
pub type KernelShapSystem64 = KernelShapSystem<f64>;

pub type DesignMatrix32 = DesignMatrix<f32>;
pub type GramSystem32 = GramSystem<f32>;
pub type CoalitionPlan32 = CoalitionPlan<f32>;
pub type CoefficientSet32 = CoefficientSet<f32>;
pub type ContributionVector32 = ContributionVector<f32>;
pub type ShapleyResult32 = ShapleyResult<f32>;
pub type KernelShapSystem32 = KernelShapSystem<f32>;
