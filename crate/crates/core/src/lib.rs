//! Numerics for stability estimates of the Fourier phase problem.
//!
//! Fields live on centred uniform grids with a unitary discrete transform,
//! so Sobolev norms, Fourier multipliers and the trivial ambiguities
//! (global phase, translation, conjugate reflection) act exactly. On top of
//! that the crate assembles each term of the magnitude-based stability
//! estimates, the conditional estimates for partially disjoint spectra and
//! the identity for unimodular multipliers, and runs seeded suites of them.

pub mod ambiguity;
pub mod bounds;
pub mod conditional;
pub mod error;
pub mod field;
pub mod fld;
pub mod gen;
pub mod norms;
pub mod suite;
pub mod support;

pub use ambiguity::{
    apply_element, optimal_phase, quotient_distance, unimodular_optimal_multiplier,
    AmbiguityElement, GroupSpec, QuotientDistance, UnimodularFit,
};
pub use bounds::{
    basic_support_estimate, beckner_constant, finiteness_conditions, lemma_gap,
    sobolev_embedding_check, stability_bound, steinerberger_bound, BoundOptions, ComparatorTerms,
    ConstantMode, FinitenessFlags, LemmaGap, MaskMeta, StabilityReport,
};
pub use conditional::{
    conditional_bound, disjointness_ratio, quotient_conditional_bound, r_zero, ConditionalReport,
    MaskPolicy,
};
pub use error::{Error, Result};
pub use field::{forward_transform, inverse_transform, GridSpec, SampledField, SpectralField};
pub use gen::{AmplitudeLaw, Family, GenSpec, MaskSpec};
pub use norms::{bessel_norm, lp_norm, sobolev_norm, weight_norm, Exponent, StabilityParams};
pub use suite::{Check, RunConfig};
pub use support::{MaskProvenance, SupportMask};
