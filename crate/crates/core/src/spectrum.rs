//! Schmidt spectra, their tail functions, and the Vidal-monotone checks.
//!
//! A [`SchmidtSpectrum`] stores `ln λ_n` for the first `N` Schmidt weights
//! together with the log of an upper bound on the probability mass left
//! beyond the cut. The bound is zero (`-inf`) for an exact finite-rank state;
//! closed-form families supply the mass exactly. The tail function is
//! defined on `0..=N` with `g(N)` equal to the stored bound.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{log_add_exp, log_sub_exp, log_sum_exp, Scalar};

/// Free-form provenance attached to a spectrum (family, parameters, offset).
pub type Metadata = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("spectrum has no weights")]
    Empty,
    #[error("weight {index} is not finite")]
    NonFinite { index: usize },
    #[error("weight {index} is not strictly positive")]
    NonPositive { index: usize },
    #[error("weights not in nonincreasing order at index {index}")]
    NotSorted { index: usize },
    #[error("weights not normalized (residual {residual:e})")]
    NotNormalized { residual: f64 },
    #[error("invalid tail mass: {0}")]
    InvalidTail(String),
}

/// Normalized, nonincreasing Schmidt weights stored as natural logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum<T> {
    log_weights: Vec<T>,
    log_tail: T,
    metadata: Metadata,
}

impl<T: Scalar> SchmidtSpectrum<T> {
    /// Builds a spectrum from linear-domain weights.
    ///
    /// With `strict_order` the weights must already be nonincreasing;
    /// otherwise they are sorted first. The result is an exact finite-rank
    /// state (no tail).
    pub fn build(weights: &[T], strict_order: bool) -> Result<Self, SpectrumError> {
        if weights.is_empty() {
            return Err(SpectrumError::Empty);
        }
        for (index, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(SpectrumError::NonFinite { index });
            }
            if *w <= T::zero() {
                return Err(SpectrumError::NonPositive { index });
            }
        }
        let mut sorted = weights.to_vec();
        if !strict_order {
            sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
        }
        let logs = sorted.iter().map(|w| w.ln()).collect();
        Self::from_log_weights(logs, T::neg_infinity(), Metadata::new())
    }

    /// Builds a spectrum from `ln λ_n` and the log of the tail mass beyond
    /// the last stored weight (`-inf` for none). The ordering must already
    /// be nonincreasing.
    pub fn from_log_weights(
        log_weights: Vec<T>,
        log_tail: T,
        metadata: Metadata,
    ) -> Result<Self, SpectrumError> {
        if log_weights.is_empty() {
            return Err(SpectrumError::Empty);
        }
        for (index, w) in log_weights.iter().enumerate() {
            if w.is_nan() || *w == T::infinity() {
                return Err(SpectrumError::NonFinite { index });
            }
            if *w == T::neg_infinity() {
                return Err(SpectrumError::NonPositive { index });
            }
        }
        if let Some(index) = log_weights.windows(2).position(|w| w[0] < w[1]) {
            return Err(SpectrumError::NotSorted { index: index + 1 });
        }
        if log_tail.is_nan() || log_tail > T::zero() {
            return Err(SpectrumError::InvalidTail(format!("log tail {log_tail}")));
        }

        // The true total lies in [stored, stored + tail]; 1 must be inside.
        let tol = T::normalization_tolerance();
        let stored = log_sum_exp(&log_weights).exp();
        let with_tail = log_add_exp(log_sum_exp(&log_weights), log_tail).exp();
        let residual = if stored > T::one() {
            stored - T::one()
        } else if with_tail < T::one() {
            with_tail - T::one()
        } else {
            T::zero()
        };
        if residual.abs() > tol {
            return Err(SpectrumError::NotNormalized {
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }

        Ok(SchmidtSpectrum {
            log_weights,
            log_tail,
            metadata,
        })
    }

    pub fn with_metadata(mut self, metadata: Metadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn log_weights(&self) -> &[T] {
        &self.log_weights
    }

    /// Number of stored weights (the truncation horizon `N`).
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn weight(&self, n: usize) -> T {
        self.log_weights[n].exp()
    }

    /// Log of the probability mass beyond the stored weights.
    pub fn log_tail(&self) -> T {
        self.log_tail
    }

    /// Mass beyond the stored weights; zero for exact finite-rank states.
    pub fn tail_bound(&self) -> T {
        self.log_tail.exp()
    }

    pub fn is_exact(&self) -> bool {
        self.log_tail == T::neg_infinity()
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    /// Parses a numeric metadata entry.
    pub fn meta_value(&self, key: &str) -> Option<T> {
        self.metadata
            .get(key)
            .and_then(|v| v.parse::<f64>().ok())
            .map(T::lit)
    }

    /// True when the tail mass is below the last stored weight, i.e. the
    /// cut sits where the remaining weights are individually negligible.
    pub fn cut_is_fine(&self) -> bool {
        self.log_tail < *self.log_weights.last().expect("nonempty")
    }

    pub fn tail_function(&self) -> TailFunction<T> {
        tail_function(self)
    }
}

/// `ln g(n)` for `n = 0..=N`, with `g(n) = Σ_{I≥n} λ_I`. The last entry is
/// the tail mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFunction<T> {
    log_g: Vec<T>,
}

impl<T: Scalar> TailFunction<T> {
    pub fn log_g(&self) -> &[T] {
        &self.log_g
    }

    pub fn len(&self) -> usize {
        self.log_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_g.is_empty()
    }

    pub fn g(&self, n: usize) -> T {
        self.log_g[n].exp()
    }

    /// `ln λ_n = ln(g(n) - g(n+1))` for the stored range.
    pub fn log_differences(&self) -> Vec<T> {
        self.log_g
            .windows(2)
            .map(|w| log_sub_exp(w[0], w[1]))
            .collect()
    }
}

/// Reverse log-domain accumulation of the weights, seeded with the tail mass.
pub fn tail_function<T: Scalar>(s: &SchmidtSpectrum<T>) -> TailFunction<T> {
    let n = s.len();
    let mut log_g = vec![T::zero(); n + 1];
    log_g[n] = s.log_tail;
    for i in (0..n).rev() {
        log_g[i] = log_add_exp(s.log_weights[i], log_g[i + 1]);
    }
    TailFunction { log_g }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub first_failure: Option<usize>,
}

impl CheckOutcome {
    fn from_failure(first_failure: Option<usize>) -> Self {
        CheckOutcome {
            passed: first_failure.is_none(),
            first_failure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationCheck<T> {
    pub passed: bool,
    pub residual: T,
}

/// Outcome of the four Vidal-monotone conditions over the stored range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport<T> {
    pub positivity: CheckOutcome,
    pub strict_monotonicity: CheckOutcome,
    pub convexity: CheckOutcome,
    pub normalization: NormalizationCheck<T>,
}

impl<T> ConditionReport<T> {
    pub fn all_pass(&self) -> bool {
        self.positivity.passed
            && self.strict_monotonicity.passed
            && self.convexity.passed
            && self.normalization.passed
    }
}

/// Checks positivity `g(n) > 0`, strict monotonicity `g(n) > g(n+1)`,
/// convexity `2g(n+1) ≤ g(n) + g(n+2)` and `g(0) = 1` on `0..=N`.
///
/// Since `λ_n = g(n) - g(n+1)`, monotonicity is `λ_n > 0` and convexity is
/// `λ_n ≥ λ_{n+1}`; both are tested on the weights, where they do not lose
/// precision to the size of `g`.
pub fn vidal_conditions<T: Scalar>(s: &SchmidtSpectrum<T>) -> ConditionReport<T> {
    let tail = tail_function(s);
    let positivity = tail.log_g.iter().position(|&lg| lg == T::neg_infinity());
    let strict_monotonicity = s
        .log_weights
        .iter()
        .position(|&lw| !(lw > T::neg_infinity()));
    let convexity = s.log_weights.windows(2).position(|w| w[0] < w[1]);
    let residual = tail.g(0) - T::one();
    ConditionReport {
        positivity: CheckOutcome::from_failure(positivity),
        strict_monotonicity: CheckOutcome::from_failure(strict_monotonicity),
        convexity: CheckOutcome::from_failure(convexity),
        normalization: NormalizationCheck {
            passed: residual.abs() <= T::normalization_tolerance(),
            residual,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidtRank {
    Finite(usize),
    /// A tail beyond the stored weights exists; the rank is not finite.
    Truncated,
}

/// Scalar summaries of a spectrum.
///
/// `mean_excitation` is the per-mode photon number `Σ n λ_n` over the
/// stored weights; the total two-mode photon number is twice this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats<T> {
    pub entropy_bits: T,
    pub schmidt_rank: SchmidtRank,
    pub mean_excitation: T,
}

pub fn summary_stats<T: Scalar>(s: &SchmidtSpectrum<T>) -> SummaryStats<T> {
    let mut entropy = T::zero();
    let mut excitation = T::zero();
    for (n, &lw) in s.log_weights.iter().enumerate() {
        let w = lw.exp();
        if w > T::zero() {
            entropy = entropy - w * lw;
            excitation = excitation + T::from_index(n) * w;
        }
    }
    SummaryStats {
        entropy_bits: entropy / T::LN_2(),
        schmidt_rank: if s.is_exact() {
            SchmidtRank::Finite(s.len())
        } else {
            SchmidtRank::Truncated
        },
        mean_excitation: excitation,
    }
}
