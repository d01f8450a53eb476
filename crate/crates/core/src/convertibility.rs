//! LOCC and SLOCC convertibility between pure states, and the `R⁻`/`R⁺`
//! monotones against a totally ordered reference family.
//!
//! Every decision works on tail functions `g(n) = Σ_{I≥n} λ_I`: deterministic
//! conversion `a → b` holds iff `g_a(n) ≥ g_b(n)` for all `n`, the optimal
//! success probability is `min_n g_a(n) / g_b(n)`, and SLOCC conversion holds
//! iff that ratio stays bounded away from zero.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::families::{r_grid, FamilyError};
use crate::oscillation::{
    certificate_from_sequence, classify_trend, log_g_uncertainty, log_ratio_sequence,
    OscillationCertificate, OscillationError, Trend, TrendThresholds, Window,
    DEFAULT_TRUNCATION_TOLERANCE,
};
use crate::scalar::Scalar;
use crate::spectrum::{tail_function, vidal_conditions, SchmidtSpectrum, TailFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvertibilityError {
    #[error("tail mass could flip the comparison at n = {index}")]
    TruncationUnsafe { index: usize },
    #[error("window has {len} points, at least {min} required")]
    WindowTooSmall { len: usize, min: usize },
    #[error("family member r = {r} is invalid: {reason}")]
    InvalidFamily { r: f64, reason: String },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error(transparent)]
    Oscillation(#[from] OscillationError),
}

/// Normalized `ln g(n)` with its truncation uncertainty, or `None` where the
/// value is unknown (beyond the cut of a truncated spectrum).
struct Tails<T> {
    g: TailFunction<T>,
    log_tail: T,
    log_g0: T,
    exact: bool,
}

impl<T: Scalar> Tails<T> {
    fn new(s: &SchmidtSpectrum<T>) -> Self {
        let g = tail_function(s);
        let log_g0 = g.log_g()[0];
        Tails {
            g,
            log_tail: s.log_tail(),
            log_g0,
            exact: s.is_exact(),
        }
    }

    fn stored(&self) -> usize {
        self.g.len()
    }

    fn at(&self, n: usize) -> Option<(T, T)> {
        if n < self.g.len() {
            let lg = self.g.log_g()[n];
            Some((lg - self.log_g0, log_g_uncertainty(self.log_tail, lg)))
        } else if self.exact {
            Some((T::neg_infinity(), T::zero()))
        } else {
            None
        }
    }
}

/// Shared walk over `n ≥ 1` where both tails are known to within the
/// truncation tolerance. `visit` receives the normalized log tails and their
/// uncertainties and returns whether to continue.
fn walk<T: Scalar>(
    a: &Tails<T>,
    b: &Tails<T>,
    mut visit: impl FnMut(usize, (T, T), (T, T)) -> Result<bool, ConvertibilityError>,
) -> Result<(), ConvertibilityError> {
    let tol = T::lit(DEFAULT_TRUNCATION_TOLERANCE);
    let end = a.stored().max(b.stored());
    for n in 1..end {
        let (Some(x), Some(y)) = (a.at(n), b.at(n)) else {
            return stop_at(n);
        };
        if !(x.1 <= tol && y.1 <= tol) {
            return stop_at(n);
        }
        if !visit(n, x, y)? {
            break;
        }
    }
    Ok(())
}

fn stop_at(n: usize) -> Result<(), ConvertibilityError> {
    if n <= 1 {
        Err(ConvertibilityError::TruncationUnsafe { index: n })
    } else {
        Ok(())
    }
}

fn comparison_slack<T: Scalar>() -> T {
    T::epsilon() * T::lit(64.0)
}

/// Nielsen's criterion: `a → b` by LOCC iff `g_a(n) ≥ g_b(n)` for all `n`.
///
/// Truncated spectra are compared where both tail functions are known to
/// within the truncation tolerance; a comparison inside that range which the
/// tail mass could overturn is an error.
pub fn locc_convertible<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
) -> Result<bool, ConvertibilityError> {
    let (ta, tb) = (Tails::new(a), Tails::new(b));
    locc_from_tails(&ta, &tb)
}

fn locc_from_tails<T: Scalar>(ta: &Tails<T>, tb: &Tails<T>) -> Result<bool, ConvertibilityError> {
    let slack = comparison_slack::<T>();
    let mut holds = true;
    walk(ta, tb, |n, (la, ua), (lb, ub)| {
        if lb == T::neg_infinity() {
            return Ok(true);
        }
        if la - ua >= lb - slack {
            Ok(true)
        } else if la < lb - ub - slack {
            holds = false;
            Ok(false)
        } else {
            Err(ConvertibilityError::TruncationUnsafe { index: n })
        }
    })?;
    Ok(holds)
}

/// Optimal probability of `a → b`: `min_n g_a(n) / g_b(n)`, clamped to
/// `[0, 1]`. Equals one exactly when [`locc_convertible`] holds. For
/// truncated spectra the minimum runs over the range compared by
/// [`locc_convertible`], so the result is an upper bound.
pub fn max_probability<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
) -> Result<T, ConvertibilityError> {
    let (ta, tb) = (Tails::new(a), Tails::new(b));
    if locc_from_tails(&ta, &tb)? {
        return Ok(T::one());
    }
    let mut best = T::zero();
    walk(&ta, &tb, |_, (la, _), (lb, _)| {
        if lb != T::neg_infinity() {
            best = best.min(la - lb);
        }
        Ok(true)
    })?;
    Ok(best.exp().min(T::one()).max(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    TwoWay,
    OneWayAtoB,
    OneWayBtoA,
    Incomparable,
    Undecided,
}

impl Verdict {
    /// The verdict for the swapped pair.
    pub fn mirrored(self) -> Verdict {
        match self {
            Verdict::OneWayAtoB => Verdict::OneWayBtoA,
            Verdict::OneWayBtoA => Verdict::OneWayAtoB,
            other => other,
        }
    }

    fn from_directions(forward: Evidence, reverse: Evidence) -> Verdict {
        use Evidence::{No, Yes};
        match (forward, reverse) {
            (Yes, Yes) => Verdict::TwoWay,
            (Yes, No) => Verdict::OneWayAtoB,
            (No, Yes) => Verdict::OneWayBtoA,
            (No, No) => Verdict::Incomparable,
            _ => Verdict::Undecided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Yes,
    No,
    Unknown,
}

impl From<bool> for Evidence {
    fn from(b: bool) -> Self {
        if b {
            Evidence::Yes
        } else {
            Evidence::No
        }
    }
}

/// Whether `g_a / g_b` stays bounded away from zero, judged from the trend
/// of `ℓ = ln g_a - ln g_b`.
pub fn bounded_below_evidence(trend: Trend) -> Evidence {
    match trend {
        Trend::BoundedBelow | Trend::DivergesUp => Evidence::Yes,
        Trend::DivergesDown | Trend::Oscillating => Evidence::No,
        Trend::Undecided => Evidence::Unknown,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMode {
    Locc,
    Prob,
    Slocc,
}

/// Window minima of the tail ratio in both directions:
/// `min_n g_a/g_b = exp(min ℓ)` and `min_n g_b/g_a = exp(-max ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonEstimate<T> {
    pub forward: T,
    pub reverse: T,
    pub log_forward: T,
    pub log_reverse: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport<T> {
    pub mode: ComparisonMode,
    pub verdict: Verdict,
    pub window: Option<Window>,
    pub forward_trend: Option<Trend>,
    pub reverse_trend: Option<Trend>,
    pub epsilon_estimate: Option<EpsilonEstimate<T>>,
    pub witnesses: Option<OscillationCertificate<T>>,
    /// Optimal probability of `a → b`.
    pub probability: Option<T>,
    /// Optimal probability of `b → a`.
    pub reverse_probability: Option<T>,
}

/// Deterministic convertibility in both directions; with `probabilities`,
/// the optimal success probabilities as well.
pub fn locc_compare<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    probabilities: bool,
) -> Result<ComparisonReport<T>, ConvertibilityError> {
    let forward = locc_convertible(a, b)?;
    let reverse = locc_convertible(b, a)?;
    let (probability, reverse_probability) = if probabilities {
        (Some(max_probability(a, b)?), Some(max_probability(b, a)?))
    } else {
        (None, None)
    };
    Ok(ComparisonReport {
        mode: if probabilities {
            ComparisonMode::Prob
        } else {
            ComparisonMode::Locc
        },
        verdict: Verdict::from_directions(forward.into(), reverse.into()),
        window: None,
        forward_trend: None,
        reverse_trend: None,
        epsilon_estimate: None,
        witnesses: None,
        probability,
        reverse_probability,
    })
}

/// SLOCC decision from the finite-window trend of `ℓ(n)`.
///
/// `a → b` is asserted only when `ℓ` shows no downward divergence and is
/// classified bounded or rising; a falling or oscillating `ℓ` rules it out.
/// Incomparable pairs carry an oscillation certificate when one is found.
pub fn slocc_decide<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    window: Option<Window>,
    th: &TrendThresholds,
) -> Result<ComparisonReport<T>, ConvertibilityError> {
    th.validate()?;
    let seq = log_ratio_sequence(a, b, window, th)?;
    if seq.values.len() < th.min_points {
        return Err(ConvertibilityError::WindowTooSmall {
            len: seq.values.len(),
            min: th.min_points,
        });
    }
    let forward = classify_trend(&seq.values, th)?;
    let reverse = forward.mirrored();
    let verdict = Verdict::from_directions(
        bounded_below_evidence(forward),
        bounded_below_evidence(reverse),
    );
    let (lo, hi) = (seq.min(), seq.max());
    let witnesses = if verdict == Verdict::Incomparable {
        certificate_from_sequence(&seq, a, b, th)?
    } else {
        None
    };
    Ok(ComparisonReport {
        mode: ComparisonMode::Slocc,
        verdict,
        window: Some(seq.window),
        forward_trend: Some(forward),
        reverse_trend: Some(reverse),
        epsilon_estimate: Some(EpsilonEstimate {
            forward: lo.exp(),
            reverse: (-hi).exp(),
            log_forward: lo,
            log_reverse: -hi,
        }),
        witnesses,
        probability: None,
        reverse_probability: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RSample<T> {
    pub r: T,
    pub verdict: Verdict,
    /// Trend of `ln g_ψ - ln g_{ξ_r}`; absent when no decision was possible.
    pub trend: Option<Trend>,
    /// Evidence that `liminf g_ψ / g_{ξ_r} = 0`.
    pub liminf_zero: Evidence,
    /// Evidence that `limsup g_ψ / g_{ξ_r} < ∞`.
    pub limsup_bounded: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairOrientation<T> {
    pub r_low: T,
    pub r_high: T,
    /// Verdict for `ξ_{r_low}` against `ξ_{r_high}`.
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneEstimate<T> {
    pub r_minus: T,
    pub r_plus: T,
    pub per_r: Vec<RSample<T>>,
    pub undecided_band: Vec<T>,
    /// Verdicts between neighbouring family members.
    pub orientation: Vec<PairOrientation<T>>,
}

fn decide_or_undecided<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    window: Option<Window>,
    th: &TrendThresholds,
) -> Option<ComparisonReport<T>> {
    slocc_decide(a, b, window, th).ok()
}

/// Locates `ψ` against the family `ξ_r`, `r ∈ [r_min, r_max]`, sampled at
/// `steps` evenly spaced points.
///
/// `R⁻` is the smallest sampled `r` where `g_ψ / g_{ξ_r}` may have
/// `liminf = 0` (unknown counts as possible); `R⁺` is the smallest sampled
/// `r` from which on the ratio has bounded `limsup`. Empty sets map to
/// `r_max`. Samples without a decision land in `undecided_band`; if the two
/// estimates cross, the crossed region joins the band and the estimate
/// widens to cover it.
pub fn estimate_r_bounds<T, F>(
    psi: &SchmidtSpectrum<T>,
    family: F,
    r_min: T,
    r_max: T,
    steps: usize,
    window: Option<Window>,
    th: &TrendThresholds,
) -> Result<MonotoneEstimate<T>, ConvertibilityError>
where
    T: Scalar,
    F: Fn(T) -> Result<SchmidtSpectrum<T>, FamilyError> + Sync,
{
    th.validate()?;
    if !(r_min <= r_max) || steps == 0 {
        return Err(ConvertibilityError::InvalidInterval(format!(
            "[{r_min}, {r_max}] with {steps} steps"
        )));
    }
    let rs = r_grid(r_min, r_max, steps);
    let members = rs
        .par_iter()
        .map(|&r| {
            let invalid = |reason: String| ConvertibilityError::InvalidFamily {
                r: r.to_f64().unwrap_or(f64::NAN),
                reason,
            };
            let s = family(r).map_err(|e| invalid(e.to_string()))?;
            let rep = vidal_conditions(&s);
            if !rep.all_pass() {
                return Err(invalid(format!("{rep:?}")));
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_r: Vec<RSample<T>> = rs
        .par_iter()
        .zip(members.par_iter())
        .map(
            |(&r, member)| match decide_or_undecided(psi, member, window, th) {
                Some(rep) => {
                    let trend = rep.forward_trend.expect("slocc report has a trend");
                    RSample {
                        r,
                        verdict: rep.verdict,
                        trend: Some(trend),
                        liminf_zero: match bounded_below_evidence(trend) {
                            Evidence::Yes => Evidence::No,
                            Evidence::No => Evidence::Yes,
                            Evidence::Unknown => Evidence::Unknown,
                        },
                        limsup_bounded: bounded_below_evidence(trend.mirrored()),
                    }
                }
                None => RSample {
                    r,
                    verdict: Verdict::Undecided,
                    trend: None,
                    liminf_zero: Evidence::Unknown,
                    limsup_bounded: Evidence::Unknown,
                },
            },
        )
        .collect();

    let orientation = rs
        .par_windows(2)
        .zip(members.par_windows(2))
        .map(|(r, m)| PairOrientation {
            r_low: r[0],
            r_high: r[1],
            verdict: decide_or_undecided(&m[0], &m[1], window, th)
                .map(|rep| rep.verdict)
                .unwrap_or(Verdict::Undecided),
        })
        .collect();

    let mut undecided_band: Vec<T> = per_r
        .iter()
        .filter(|s| s.verdict == Verdict::Undecided)
        .map(|s| s.r)
        .collect();

    let r_minus = per_r
        .iter()
        .find(|s| s.liminf_zero != Evidence::No)
        .map_or(r_max, |s| s.r);
    let mut r_plus = r_max;
    for s in per_r.iter().rev() {
        if s.limsup_bounded != Evidence::Yes {
            break;
        }
        r_plus = s.r;
    }

    let (r_minus, r_plus) = if r_minus > r_plus {
        for s in &per_r {
            if s.r >= r_plus && s.r <= r_minus && !undecided_band.contains(&s.r) {
                undecided_band.push(s.r);
            }
        }
        undecided_band.sort_by(|x, y| x.partial_cmp(y).expect("finite r"));
        (r_plus, r_minus)
    } else {
        (r_minus, r_plus)
    };

    Ok(MonotoneEstimate {
        r_minus,
        r_plus,
        per_r,
        undecided_band,
        orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{psi, tmss, OffsetSearch};

    fn spec(w: &[f64]) -> SchmidtSpectrum<f64> {
        SchmidtSpectrum::build(w, false).unwrap()
    }

    #[test]
    fn nielsen_examples() {
        assert!(locc_convertible(&spec(&[0.5, 0.5]), &spec(&[1.0])).unwrap());
        assert!(!locc_convertible(&spec(&[0.8, 0.2]), &spec(&[0.5, 0.5])).unwrap());
        assert!(locc_convertible(&spec(&[0.4, 0.4, 0.2]), &spec(&[0.5, 0.5])).unwrap());
        assert!(!locc_convertible(&spec(&[1.0]), &spec(&[0.5, 0.5])).unwrap());
    }

    #[test]
    fn probability_examples() {
        let p = max_probability(&spec(&[0.8, 0.2]), &spec(&[0.5, 0.5])).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        assert_eq!(
            max_probability(&spec(&[0.5, 0.5]), &spec(&[1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            max_probability(&spec(&[0.5, 0.5]), &spec(&[0.4, 0.3, 0.3])).unwrap(),
            0.0
        );
    }

    #[test]
    fn equal_tails_convert() {
        let a = spec(&[0.5, 0.25, 0.25]);
        let b = spec(&[0.5, 0.5]);
        assert!(locc_convertible(&a, &b).unwrap());
        assert_eq!(max_probability(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn truncated_geometric_order() {
        let (a, b) = (tmss(0.6, 200).unwrap(), tmss(0.4, 200).unwrap());
        assert!(locc_convertible(&a, &b).unwrap());
        assert!(!locc_convertible(&b, &a).unwrap());
        // min over the compared range is (0.4/0.6)^(2 n_max)
        let p = max_probability(&b, &a).unwrap();
        assert!(p > 0.0 && p < 1e-40, "{p}");
        let short = max_probability(&tmss(0.4, 20).unwrap(), &tmss(0.6, 20).unwrap()).unwrap();
        assert!(short < 0.16 / 0.36);
    }

    #[test]
    fn unsafe_truncation_is_reported() {
        let a = tmss(0.9, 30).unwrap();
        let b = tmss(0.8, 30).unwrap();
        assert!(matches!(
            locc_convertible(&a, &b),
            Err(ConvertibilityError::TruncationUnsafe { .. })
        ));
    }

    #[test]
    fn slocc_tmss_pair() {
        let (a, b) = (tmss(0.6, 600).unwrap(), tmss(0.4, 600).unwrap());
        let th = TrendThresholds::default();
        let rep = slocc_decide(&a, &b, Some(Window::new(0, 500)), &th).unwrap();
        assert_eq!(rep.verdict, Verdict::OneWayAtoB);
        assert_eq!(rep.reverse_trend, Some(Trend::DivergesDown));
        let back = slocc_decide(&b, &a, Some(Window::new(0, 500)), &th).unwrap();
        assert_eq!(back.verdict, Verdict::OneWayBtoA);
    }

    #[test]
    fn slocc_identity() {
        let a = tmss(0.5, 200).unwrap();
        let rep = slocc_decide(&a, &a, None, &TrendThresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::TwoWay);
        let eps = rep.epsilon_estimate.unwrap();
        assert_eq!((eps.forward, eps.reverse), (1.0, 1.0));
    }

    #[test]
    fn slocc_window_too_small() {
        let a = tmss(0.5, 200).unwrap();
        let err = slocc_decide(
            &a,
            &a,
            Some(Window::new(0, 10)),
            &TrendThresholds::default(),
        );
        assert!(matches!(
            err,
            Err(ConvertibilityError::WindowTooSmall { len: 11, .. })
        ));
    }

    #[test]
    fn slocc_psi_incomparable() {
        let search = OffsetSearch::default();
        let p2 = psi(2, 1e6, 10_000, &search).unwrap();
        let p1 = psi(1, 1e6, 10_000, &search).unwrap();
        let rep = slocc_decide(&p2, &p1, None, &TrendThresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Incomparable);
        assert!(rep.witnesses.unwrap().verify(&p2, &p1));
    }

    #[test]
    fn r_bounds_fall_back_when_window_small() {
        let t = tmss(0.5, 200).unwrap();
        let th = TrendThresholds::default();
        let est = estimate_r_bounds(
            &t,
            |r| tmss(0.3 + 0.1 * r, 200),
            1.0,
            2.0,
            5,
            Some(Window::new(0, 10)),
            &th,
        )
        .unwrap();
        assert_eq!((est.r_minus, est.r_plus), (1.0, 2.0));
        assert_eq!(est.undecided_band.len(), 5);
    }
}
