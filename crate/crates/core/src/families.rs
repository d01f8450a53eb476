//! Analytic state families: two-mode squeezed states, the `ξ_r` family and
//! the mutually incomparable `Ψ_k` family.
//!
//! The latter two are built from a continuous Vidal curve
//! `d(x) = e^{-x} p_r(x + a)^k` with
//! `p_r(x) = (ln x)^r (sin(ln x) + 1) + 1/ln x`, sampled at `x = Δn` and
//! normalized so that `g(0) = 1`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{log_add_exp, log_sub_exp, Scalar};
use crate::spectrum::{Metadata, SchmidtSpectrum, SpectrumError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("squeezing parameter {0} outside [0, 1)")]
    QOutOfRange(f64),
    #[error("p_r evaluated at x = {x} <= 1")]
    DomainError { x: f64 },
    #[error("p_r(x) <= 0 at x = {x}")]
    NonPositiveP { x: f64 },
    #[error("no offset <= {max_offset} satisfies the curve conditions")]
    NotFound { max_offset: f64 },
    #[error("curve conditions violated at x = {x}")]
    ConditionViolated { x: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

fn as_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// How a squeezing parameter `q` maps to the grid step `Δ`.
///
/// Under `Schmidt` a squeezed state with weights `∝ q^{2n}` is the `k = 0`
/// member at `Δ = -2 ln q`; under `Amplitude`, `Δ = -ln q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    #[default]
    Schmidt,
    Amplitude,
}

impl DeltaConvention {
    pub fn delta_from_q<T: Scalar>(self, q: T) -> T {
        match self {
            DeltaConvention::Schmidt => -(q.ln()) * T::lit(2.0),
            DeltaConvention::Amplitude => -q.ln(),
        }
    }
}

impl FromStr for DeltaConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schmidt" => Ok(DeltaConvention::Schmidt),
            "amplitude" => Ok(DeltaConvention::Amplitude),
            other => Err(format!("unknown delta convention '{other}'")),
        }
    }
}

/// `p_r` and its first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValues<T> {
    pub value: T,
    pub first: T,
    pub second: T,
}

/// Evaluates `p_r(x)`, `p_r'(x)` and `p_r''(x)` for `x > 1`.
///
/// With `L = ln x` and `q(L) = r L^{r-1}(sin L + 1) + L^r cos L - L^{-2}`:
/// `p' = q / x` and `p'' = (q'(L) - q(L)) / x²`.
pub fn eval_p<T: Scalar>(r: T, x: T) -> Result<PValues<T>, FamilyError> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(FamilyError::InvalidParameter(format!("r = {r}")));
    }
    if !(x > T::one()) {
        return Err(FamilyError::DomainError { x: as_f64(x) });
    }
    let one = T::one();
    let two = T::lit(2.0);
    let l = x.ln();
    let (s, c) = l.sin_cos();
    let lr = l.powf(r);
    let lr1 = l.powf(r - one);
    let lr2 = l.powf(r - two);
    let value = lr * (s + one) + l.recip();
    let q = r * lr1 * (s + one) + lr * c - l.powi(-2);
    let dq = r * (r - one) * lr2 * (s + one) + two * r * lr1 * c - lr * s + two * l.powi(-3);
    Ok(PValues {
        value,
        first: q / x,
        second: (dq - q) / (x * x),
    })
}

/// `d(x) = e^{-x} p_r(x + a)^k`, handled through its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VidalCurve<T> {
    k: u32,
    r: T,
    offset: T,
}

impl<T: Scalar> VidalCurve<T> {
    pub fn new(k: u32, r: T, offset: T) -> Result<Self, FamilyError> {
        if !(r > T::zero()) || !r.is_finite() {
            return Err(FamilyError::InvalidParameter(format!("r = {r}")));
        }
        if !(offset >= T::zero()) || !offset.is_finite() {
            return Err(FamilyError::InvalidParameter(format!("offset = {offset}")));
        }
        Ok(VidalCurve { k, r, offset })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    /// `p_r(x + a)` with derivatives.
    pub fn p(&self, x: T) -> Result<PValues<T>, FamilyError> {
        eval_p(self.r, x + self.offset)
    }

    /// `ln d(x) = -x + k ln p_r(x + a)`.
    pub fn log_value(&self, x: T) -> Result<T, FamilyError> {
        if self.k == 0 {
            return Ok(-x);
        }
        let p = self.p(x)?.value;
        if !(p > T::zero()) {
            return Err(FamilyError::NonPositiveP { x: as_f64(x) });
        }
        Ok(-x + T::from_u32(self.k).unwrap() * p.ln())
    }
}

/// Sign functionals of a curve: `d' < 0 ⟺ monotonicity > 0` and
/// `d'' ≥ 0 ⟺ convexity ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFunctionals<T> {
    pub monotonicity: T,
    pub convexity: T,
}

/// With `u = p'/p`: `M = 1 - k u` (that is `-d'/d`) and
/// `C = (1 - k u)² + k (p''/p - u²)` (that is `d''/d`).
pub fn curve_conditions<T: Scalar>(
    c: &VidalCurve<T>,
    x: T,
) -> Result<CurveFunctionals<T>, FamilyError> {
    if c.k == 0 {
        return Ok(CurveFunctionals {
            monotonicity: T::one(),
            convexity: T::one(),
        });
    }
    let p = c.p(x)?;
    if !(p.value > T::zero()) {
        return Err(FamilyError::NonPositiveP { x: as_f64(x) });
    }
    let k = T::from_u32(c.k).unwrap();
    let u = p.first / p.value;
    let m = T::one() - k * u;
    Ok(CurveFunctionals {
        monotonicity: m,
        convexity: m * m + k * (p.second / p.value - u * u),
    })
}

/// Grid settings for [`find_offset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSearch<T> {
    pub grid_step: T,
    /// Right end `H` of the checked window `[0, H]`.
    pub horizon: T,
    /// Required lower bound on the monotonicity functional.
    pub margin: T,
    /// Largest offset tried; defaults to `10⁶ · grid_step`.
    pub max_offset: Option<T>,
}

impl<T: Scalar> Default for OffsetSearch<T> {
    fn default() -> Self {
        OffsetSearch {
            grid_step: T::lit(0.01),
            horizon: T::lit(200.0),
            margin: T::zero(),
            max_offset: None,
        }
    }
}

fn point_fails<T: Scalar>(k: u32, r: T, y: T, margin: T) -> bool {
    if !(y > T::one()) {
        return true;
    }
    let curve = VidalCurve {
        k,
        r,
        offset: T::zero(),
    };
    match curve_conditions(&curve, y) {
        Ok(f) => !(f.monotonicity > margin) || !(f.convexity >= T::zero()),
        Err(_) => true,
    }
}

/// Smallest grid offset `a` for which the `(k, r)` curve satisfies the
/// monotonicity and convexity conditions on a grid over `[0, H]`.
///
/// Only the window `[0, H]` is checked; validity further out is not
/// certified here (discretization re-checks its own range).
pub fn find_offset<T: Scalar>(k: u32, r: T, search: &OffsetSearch<T>) -> Result<T, FamilyError> {
    find_common_offset(k, &[r], search)
}

/// Smallest grid offset valid simultaneously for every `r` in `rs`.
pub fn find_common_offset<T: Scalar>(
    k: u32,
    rs: &[T],
    search: &OffsetSearch<T>,
) -> Result<T, FamilyError> {
    let step = search.grid_step;
    if !(step > T::zero()) || !(search.horizon > T::zero()) {
        return Err(FamilyError::InvalidParameter(
            "grid_step and horizon must be positive".into(),
        ));
    }
    if rs.is_empty() {
        return Err(FamilyError::InvalidParameter("no r values".into()));
    }
    if k == 0 {
        return Ok(T::zero());
    }
    let max_offset = search.max_offset.unwrap_or_else(|| step * T::lit(1e6));
    let span = (search.horizon / step)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX);
    let max_start = (max_offset / step).floor().to_usize().unwrap_or(0);

    // The curve with offset i·s checked at x = m·s is the base function at
    // y = (i + m)·s, so one sweep over y finds the first clean window.
    let mut start = 0usize;
    let mut j = 0usize;
    while j <= start + span {
        let y = T::from_index(j) * step;
        if rs.iter().any(|&r| point_fails(k, r, y, search.margin)) {
            start = j + 1;
            if start > max_start {
                return Err(FamilyError::NotFound {
                    max_offset: as_f64(max_offset),
                });
            }
        }
        j += 1;
    }
    Ok(T::from_index(start) * step)
}

/// Step of the linear part of the discretization check.
const VERIFY_LINEAR_STEP: f64 = 0.01;
/// End of the linear part; beyond it the check is uniform in `ln(x + a)`.
const VERIFY_LINEAR_END: f64 = 1000.0;
const VERIFY_LOG_STEP: f64 = 1e-3;

/// Checks the curve conditions on `[0, x_max]`.
pub fn verify_curve<T: Scalar>(c: &VidalCurve<T>, x_max: T) -> Result<(), FamilyError> {
    if c.k == 0 {
        return Ok(());
    }
    let check = |x: T| -> Result<(), FamilyError> {
        let ok = match curve_conditions(c, x) {
            Ok(f) => f.monotonicity > T::zero() && f.convexity >= T::zero(),
            Err(_) => false,
        };
        if ok {
            Ok(())
        } else {
            Err(FamilyError::ConditionViolated { x: as_f64(x) })
        }
    };
    let h = T::lit(VERIFY_LINEAR_STEP);
    let lin_end = x_max.min(T::lit(VERIFY_LINEAR_END));
    let mut i = 0usize;
    loop {
        let x = T::from_index(i) * h;
        if x > lin_end {
            break;
        }
        check(x)?;
        i += 1;
    }
    if x_max > lin_end {
        let y0 = (lin_end + c.offset).ln();
        let y1 = (x_max + c.offset).ln();
        let dl = T::lit(VERIFY_LOG_STEP);
        let mut j = 1usize;
        loop {
            let l = y0 + T::from_index(j) * dl;
            if l >= y1 {
                break;
            }
            check(l.exp() - c.offset)?;
            j += 1;
        }
        check(x_max)?;
    }
    Ok(())
}

fn fmt_meta<T: Scalar>(x: T) -> String {
    format!("{}", as_f64(x))
}

/// Samples `g(n) = d(Δn) / d(0)` for `n = 0..=N` and returns the spectrum
/// with `λ_n = g(n) - g(n+1)` and tail mass `g(N)`.
pub fn discretize<T: Scalar>(
    c: &VidalCurve<T>,
    delta: T,
    horizon: usize,
) -> Result<SchmidtSpectrum<T>, FamilyError> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(FamilyError::InvalidParameter(format!("delta = {delta}")));
    }
    if horizon == 0 {
        return Err(FamilyError::InvalidParameter("horizon must be >= 1".into()));
    }
    verify_curve(c, delta * T::from_index(horizon))?;

    let log_d0 = c.log_value(T::zero())?;
    let log_g = (0..=horizon)
        .map(|n| c.log_value(delta * T::from_index(n)).map(|v| v - log_d0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut log_weights = Vec::with_capacity(horizon);
    for n in 0..horizon {
        if !(log_g[n] > log_g[n + 1]) {
            return Err(FamilyError::ConditionViolated {
                x: as_f64(delta * T::from_index(n)),
            });
        }
        log_weights.push(log_sub_exp(log_g[n], log_g[n + 1]));
    }

    let mut meta = Metadata::new();
    meta.insert("delta".into(), fmt_meta(delta));
    meta.insert("k".into(), c.k.to_string());
    meta.insert("r".into(), fmt_meta(c.r));
    meta.insert("offset".into(), fmt_meta(c.offset));
    Ok(SchmidtSpectrum::from_log_weights(
        log_weights,
        log_g[horizon],
        meta,
    )?)
}

/// Two-mode squeezed state, `λ_n = (1 - q²) q^{2n}` for `n < N`, with the
/// exact geometric tail `q^{2N}`.
pub fn tmss<T: Scalar>(q: T, horizon: usize) -> Result<SchmidtSpectrum<T>, FamilyError> {
    if !(q >= T::zero() && q < T::one()) {
        return Err(FamilyError::QOutOfRange(as_f64(q)));
    }
    let mut meta = Metadata::new();
    meta.insert("family".into(), "tmss".into());
    meta.insert("q".into(), fmt_meta(q));
    if q == T::zero() {
        return Ok(SchmidtSpectrum::from_log_weights(
            vec![T::zero()],
            T::neg_infinity(),
            meta,
        )?);
    }
    let delta = DeltaConvention::Schmidt.delta_from_q(q);
    let s = tmss_from_delta(delta, horizon)?;
    meta.insert("delta".into(), fmt_meta(delta));
    Ok(s.with_metadata(meta))
}

/// Squeezed state parameterized by its geometric step: `λ_n ∝ e^{-Δn}`.
/// This is the `k = 0` member of the curve family at step `Δ`.
pub fn tmss_from_delta<T: Scalar>(
    delta: T,
    horizon: usize,
) -> Result<SchmidtSpectrum<T>, FamilyError> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(FamilyError::InvalidParameter(format!("delta = {delta}")));
    }
    if horizon == 0 {
        return Err(FamilyError::InvalidParameter("horizon must be >= 1".into()));
    }
    let head = (-(-delta).exp_m1()).ln();
    let log_weights = (0..horizon)
        .map(|n| head - delta * T::from_index(n))
        .collect();
    let mut meta = Metadata::new();
    meta.insert("family".into(), "tmss".into());
    meta.insert("delta".into(), fmt_meta(delta));
    Ok(SchmidtSpectrum::from_log_weights(
        log_weights,
        -delta * T::from_index(horizon),
        meta,
    )?)
}

/// `Ψ_k`: the curve `e^{-x} p_1(x + a_k)^k` at step `Δ`, with `a_k` found
/// by [`find_offset`].
pub fn psi<T: Scalar>(
    k: u32,
    delta: T,
    horizon: usize,
    search: &OffsetSearch<T>,
) -> Result<SchmidtSpectrum<T>, FamilyError> {
    let offset = find_offset(k, T::one(), search)?;
    psi_with_offset(k, delta, horizon, offset)
}

pub fn psi_with_offset<T: Scalar>(
    k: u32,
    delta: T,
    horizon: usize,
    offset: T,
) -> Result<SchmidtSpectrum<T>, FamilyError> {
    let curve = VidalCurve::new(k, T::one(), offset)?;
    let s = discretize(&curve, delta, horizon)?;
    let mut meta = s.metadata().clone();
    meta.insert("family".into(), "psi".into());
    Ok(s.with_metadata(meta))
}

/// `ξ_r`: the curve `e^{-x} p_r(x + a)` at step `Δ`. The offset should be
/// shared across the members being compared (see [`xi_family_offset`]).
pub fn xi<T: Scalar>(
    r: T,
    delta: T,
    horizon: usize,
    offset: T,
) -> Result<SchmidtSpectrum<T>, FamilyError> {
    let curve = VidalCurve::new(1, r, offset)?;
    let s = discretize(&curve, delta, horizon)?;
    let mut meta = s.metadata().clone();
    meta.insert("family".into(), "xi".into());
    Ok(s.with_metadata(meta))
}

/// Evenly spaced samples `r_min, …, r_max` (a single point when
/// `steps == 1`).
pub fn r_grid<T: Scalar>(r_min: T, r_max: T, steps: usize) -> Vec<T> {
    match steps {
        0 => Vec::new(),
        1 => vec![r_min],
        _ => {
            let h = (r_max - r_min) / T::from_index(steps - 1);
            (0..steps)
                .map(|i| {
                    if i == steps - 1 {
                        r_max
                    } else {
                        r_min + h * T::from_index(i)
                    }
                })
                .collect()
        }
    }
}

/// Offset valid for every `ξ_r` with `r` on the sampled interval.
pub fn xi_family_offset<T: Scalar>(
    r_min: T,
    r_max: T,
    samples: usize,
    search: &OffsetSearch<T>,
) -> Result<T, FamilyError> {
    if !(r_min > T::zero()) || !(r_max >= r_min) {
        return Err(FamilyError::InvalidParameter(format!(
            "r interval [{r_min}, {r_max}]"
        )));
    }
    find_common_offset(1, &r_grid(r_min, r_max, samples.max(2)), search)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Tmss,
    Xi,
    Psi,
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyTag::Tmss => "tmss",
            FamilyTag::Xi => "xi",
            FamilyTag::Psi => "psi",
        })
    }
}

impl FromStr for FamilyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tmss" => Ok(FamilyTag::Tmss),
            "xi" => Ok(FamilyTag::Xi),
            "psi" => Ok(FamilyTag::Psi),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

/// Everything needed to generate one member of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams<T> {
    pub family: FamilyTag,
    /// Grid step `Δ`.
    pub delta: T,
    pub horizon: usize,
    /// Squeezing parameter, recorded when the step came from `q`.
    pub q: Option<T>,
    pub r: T,
    pub k: u32,
    /// Fixed offset; searched for when absent.
    pub offset: Option<T>,
}

impl<T: Scalar> FamilyParams<T> {
    pub fn validate(&self) -> Result<(), FamilyError> {
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(FamilyError::InvalidParameter(format!(
                "delta = {}",
                self.delta
            )));
        }
        if let Some(q) = self.q {
            if !(q > T::zero() && q < T::one()) {
                return Err(FamilyError::QOutOfRange(as_f64(q)));
            }
        }
        if !(self.r > T::zero()) {
            return Err(FamilyError::InvalidParameter(format!("r = {}", self.r)));
        }
        if self.horizon == 0 {
            return Err(FamilyError::InvalidParameter("horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn generate(&self, search: &OffsetSearch<T>) -> Result<SchmidtSpectrum<T>, FamilyError> {
        self.validate()?;
        let s = match self.family {
            FamilyTag::Tmss => tmss_from_delta(self.delta, self.horizon)?,
            FamilyTag::Psi => match self.offset {
                Some(a) => psi_with_offset(self.k, self.delta, self.horizon, a)?,
                None => psi(self.k, self.delta, self.horizon, search)?,
            },
            FamilyTag::Xi => {
                let a = match self.offset {
                    Some(a) => a,
                    None => find_offset(1, self.r, search)?,
                };
                xi(self.r, self.delta, self.horizon, a)?
            }
        };
        match self.q {
            Some(q) => {
                let mut meta = s.metadata().clone();
                meta.insert("q".into(), fmt_meta(q));
                Ok(s.with_metadata(meta))
            }
            None => Ok(s),
        }
    }
}

/// Upper bound on `Σ_{n≥N} n λ_n`, the excitation carried by the weights
/// beyond the cut.
///
/// Exact states give zero. For the closed-form families the bound uses
/// `Σ_{n≥N} n λ_n = N g(N) + Σ_{n>N} g(n)` and a geometric majorant of
/// `g(n)` built from `p_r(y) ≤ 2 (ln y)^r + 1/ln y`. Returns `None` for
/// truncated spectra of unknown origin.
pub fn excitation_remainder_bound<T: Scalar>(s: &SchmidtSpectrum<T>) -> Option<T> {
    if s.is_exact() {
        return Some(T::zero());
    }
    let family: FamilyTag = s.metadata().get("family")?.parse().ok()?;
    let delta = s.meta_value("delta")?;
    let big_n = T::from_index(s.len());
    let log_gn = s.log_tail();
    let first = big_n.ln() + log_gn;
    let rest = match family {
        FamilyTag::Tmss => {
            // Σ_{n>N} e^{-Δn} = e^{-Δ(N+1)} / (1 - e^{-Δ})
            -delta * (big_n + T::one()) - (-(-delta).exp_m1()).ln()
        }
        FamilyTag::Psi | FamilyTag::Xi => {
            let k = T::lit(s.meta_value("k")?.to_f64()?);
            let r = s.meta_value("r")?;
            let a = s.meta_value("offset")?;
            let y = delta * big_n + a;
            let l = y.ln();
            if !(l > T::zero()) {
                return None;
            }
            let p_a = if k > T::zero() {
                eval_p(r, a).ok()?.value.ln()
            } else {
                T::zero()
            };
            let majorant_n = if k > T::zero() {
                -delta * big_n + k * ((T::lit(2.0) * l.powf(r) + l.recip()).ln() - p_a)
            } else {
                -delta * big_n
            };
            let log_rho = -delta + r * k * (delta / (y * l)).ln_1p();
            if !(log_rho < T::zero()) {
                return None;
            }
            majorant_n + log_rho - (-log_rho.exp_m1()).ln()
        }
    };
    Some(log_add_exp(first, rest).exp())
}
