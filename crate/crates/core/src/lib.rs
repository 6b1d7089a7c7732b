//! Bayesian comparison of equality- and inequality-constrained one-way
//! ANOVA models under conditional intrinsic priors.
//!
//! A typical comparison parses each hypothesis with
//! [`constraint::parse_model_spec`], then hands the data and models to
//! [`comparison::compare`], which returns Bayes factors against the null
//! model and posterior model probabilities.

pub mod comparison;
pub mod constraint;
pub mod data;
pub mod evidence;
pub mod gaussian;
pub mod posterior;
pub mod prior;
pub mod quadrature;
pub mod simulation;

pub use comparison::{compare, BfBreakdown, ComparisonReport, ComparisonSettings};
pub use constraint::{parse_model_spec, ConstraintModel};
pub use data::AnovaData;
pub use gaussian::RandomSource;
pub use prior::{estimate_null_params, make_cip, CipSpec, NullParams};
