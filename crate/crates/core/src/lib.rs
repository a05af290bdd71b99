//! Optimal selling mechanisms when the production cost is only learned after
//! the first contracting opportunity.
//!
//! A buyer with private value `theta ~ F` meets a seller whose private cost
//! `omega ~ G` is revealed one period later. [`Market`] bundles the two laws
//! and solves the four seller mechanisms:
//!
//! * ex-ante fixed price with specific performance (EAFP),
//! * ex-post optimal posted price after the cost is learned (EPO),
//! * ex-ante fixed price with an at-will cancellation clause (EAO),
//! * the dynamic mechanism: a guaranteed-delivery price now followed by an
//!   uncommitted ex-post price for types that waited (D),
//!
//! along with the discount-factor thresholds that separate their regimes.
//! [`atwill`] covers the at-will variants of the dynamic mechanism and
//! [`buyer_side`] the mirror problem with the buyer as principal, both for
//! uniform laws. [`montecarlo`] plays solved mechanisms against sampled
//! draws as an independent check.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atwill;
pub mod buyer_side;
pub mod distributions;
pub mod error;
pub mod mechanisms;
pub mod montecarlo;
pub mod numerics;

pub use distributions::{Distribution, DistributionSpec, Regularity};
pub use error::{Error, Result};
pub use mechanisms::{
    ComparisonReport, DynamicSolution, ExPostPriceRule, Market, MechanismKind, MechanismSolution,
    RegimeThresholds,
};
