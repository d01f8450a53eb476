//! Entanglement ordering of pure bipartite states from their Schmidt spectra.
//!
//! States are handled through the tail function `g(n) = Σ_{I≥n} λ_I` of
//! their Schmidt weights, computed in the log domain so that spectra decaying
//! like `e^{-10^6 n}` stay representable. On top of that sit LOCC and SLOCC
//! convertibility decisions, the `ξ_r` / `Ψ_k` state families, and
//! finite-window certificates that two states are SLOCC-incomparable.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convertibility;
pub mod families;
pub mod io;
pub mod oscillation;
pub mod scalar;
pub mod spectrum;

pub use convertibility::{
    estimate_r_bounds, locc_compare, locc_convertible, max_probability, slocc_decide,
    ComparisonMode, ComparisonReport, ConvertibilityError, Evidence, MonotoneEstimate, Verdict,
};
pub use families::{
    curve_conditions, eval_p, excitation_remainder_bound, find_offset, psi, tmss, tmss_from_delta,
    xi, xi_family_offset, DeltaConvention, FamilyError, FamilyParams, FamilyTag, OffsetSearch,
    VidalCurve,
};
pub use oscillation::{
    classify_trend, incomparability_certificate, log_ratio_sequence, OscillationCertificate,
    OscillationError, Trend, TrendThresholds, Window, Witness,
};
pub use scalar::Scalar;
pub use spectrum::{
    summary_stats, tail_function, vidal_conditions, ConditionReport, Metadata, SchmidtRank,
    SchmidtSpectrum, SpectrumError, SummaryStats, TailFunction,
};

pub type Spectrum = SchmidtSpectrum<f64>;
pub type Tail = TailFunction<f64>;
pub type Curve = VidalCurve<f64>;
pub type Report = ComparisonReport<f64>;
pub type Estimate = MonotoneEstimate<f64>;
pub type Certificate = OscillationCertificate<f64>;
