//! Trend analysis of log-ratio sequences `ℓ(n) = ln g_a(n) - ln g_b(n)`.
//!
//! A finite window cannot decide `liminf` or `limsup`, so the classifier
//! looks for sustained swings of the running extremes and abstains
//! ([`Trend::Undecided`]) otherwise.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::spectrum::{tail_function, SchmidtSpectrum, TailFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OscillationError {
    #[error("sequence has {len} points, at least {min} required")]
    TooShort { len: usize, min: usize },
    #[error("truncation makes ln g uncertain by {uncertainty:e} nats at n = {index}")]
    TruncationUnsafe { index: usize, uncertainty: f64 },
    #[error("window [{start}, {end}] exceeds the stored range 0..{available}")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        available: usize,
    },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-6;

/// Configuration shared by every finite-window decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendThresholds {
    /// Swing of the running extreme required to call a divergence.
    pub drift_nats: f64,
    /// Number of dyadic blocks in which the extreme must set new records.
    pub min_windows: usize,
    pub min_points: usize,
    /// Largest tolerated uncertainty in `ln g(n)` caused by the tail mass.
    pub truncation_tolerance: f64,
}

impl Default for TrendThresholds {
    fn default() -> Self {
        TrendThresholds {
            drift_nats: 5.0,
            min_windows: 3,
            min_points: 64,
            truncation_tolerance: DEFAULT_TRUNCATION_TOLERANCE,
        }
    }
}

impl TrendThresholds {
    pub fn validate(&self) -> Result<(), OscillationError> {
        let ok = self.drift_nats > 0.0
            && self.drift_nats.is_finite()
            && self.min_windows > 0
            && self.min_points > 1
            && self.truncation_tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(OscillationError::InvalidThresholds(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Trend {
    BoundedBelow,
    DivergesDown,
    DivergesUp,
    Oscillating,
    Undecided,
}

impl Trend {
    /// The classification of `-ℓ` given that of `ℓ`.
    pub fn mirrored(self) -> Trend {
        match self {
            Trend::DivergesDown => Trend::DivergesUp,
            Trend::DivergesUp => Trend::DivergesDown,
            other => other,
        }
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Inclusive index range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Window { start, end }
    }

    pub fn len(&self) -> usize {
        if self.end < self.start {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uncertainty of `ln g(n)` when the stored tail mass is only an upper
/// bound on what lies beyond the cut: `-ln(1 - tail / g(n))`.
pub fn log_g_uncertainty<T: Scalar>(log_tail: T, log_g: T) -> T {
    if log_tail == T::neg_infinity() {
        return T::zero();
    }
    if log_g == T::neg_infinity() {
        return T::infinity();
    }
    -(-(log_tail - log_g).exp_m1()).ln()
}

/// Last index `n` at which `ln g(n)` is finite and its uncertainty is
/// within `tolerance`, or `None` if even `n = 0` fails.
pub fn safe_horizon<T: Scalar>(s: &SchmidtSpectrum<T>, tolerance: f64) -> Option<usize> {
    safe_horizon_of(&tail_function(s), s.log_tail(), tolerance)
}

fn safe_horizon_of<T: Scalar>(g: &TailFunction<T>, log_tail: T, tolerance: f64) -> Option<usize> {
    let tol = T::lit(tolerance);
    let mut last = None;
    for (n, &lg) in g.log_g().iter().enumerate() {
        if lg == T::neg_infinity() || !(log_g_uncertainty(log_tail, lg) <= tol) {
            break;
        }
        last = Some(n);
    }
    last
}

/// Largest window starting at 0 on which both spectra are safe to compare.
pub fn default_window<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    thresholds: &TrendThresholds,
) -> Result<Window, OscillationError> {
    let tol = thresholds.truncation_tolerance;
    match (safe_horizon(a, tol), safe_horizon(b, tol)) {
        (Some(x), Some(y)) => Ok(Window::new(0, x.min(y))),
        _ => Err(OscillationError::TruncationUnsafe {
            index: 0,
            uncertainty: f64::INFINITY,
        }),
    }
}

/// `ℓ(n)` on a window, with `values[i] = ℓ(window.start + i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRatioSequence<T> {
    pub window: Window,
    pub values: Vec<T>,
}

impl<T: Scalar> LogRatioSequence<T> {
    pub fn get(&self, n: usize) -> Option<T> {
        n.checked_sub(self.window.start)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        let start = self.window.start;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (start + i, v))
    }

    pub fn negated(&self) -> Self {
        LogRatioSequence {
            window: self.window,
            values: self.values.iter().map(|&v| -v).collect(),
        }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

fn check_window<T: Scalar>(
    g: &TailFunction<T>,
    log_tail: T,
    window: Window,
    tolerance: f64,
) -> Result<(), OscillationError> {
    if window.end < window.start || window.end >= g.len() {
        return Err(OscillationError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            available: g.len(),
        });
    }
    let tol = T::lit(tolerance);
    for n in window.start..=window.end {
        let u = log_g_uncertainty(log_tail, g.log_g()[n]);
        if !(u <= tol) {
            return Err(OscillationError::TruncationUnsafe {
                index: n,
                uncertainty: u.to_f64().unwrap_or(f64::INFINITY),
            });
        }
    }
    Ok(())
}

/// Computes `ℓ(n) = ln g_a(n) - ln g_b(n)` in the log domain. Without an
/// explicit window the [`default_window`] is used.
pub fn log_ratio_sequence<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    window: Option<Window>,
    thresholds: &TrendThresholds,
) -> Result<LogRatioSequence<T>, OscillationError> {
    let window = match window {
        Some(w) => w,
        None => default_window(a, b, thresholds)?,
    };
    let (ga, gb) = (tail_function(a), tail_function(b));
    check_window(&ga, a.log_tail(), window, thresholds.truncation_tolerance)?;
    check_window(&gb, b.log_tail(), window, thresholds.truncation_tolerance)?;
    let values = (window.start..=window.end)
        .map(|n| ga.log_g()[n] - gb.log_g()[n])
        .collect();
    Ok(LogRatioSequence { window, values })
}

/// Largest rise `v[j] - v[i]` with `i <= j`, earliest pair on ties.
fn max_drawup<T: Scalar>(v: &[T]) -> (usize, usize, T) {
    let mut lo = 0;
    let mut best = (0, 0, T::zero());
    for j in 1..v.len() {
        if v[j] < v[lo] {
            lo = j;
        }
        let rise = v[j] - v[lo];
        if rise > best.2 {
            best = (lo, j, rise);
        }
    }
    best
}

/// Distinct dyadic blocks `⌊log₂(m - i + 1)⌋` holding strict running-max
/// records of `v` on `(i, j]`.
fn record_blocks<T: Scalar>(v: &[T], i: usize, j: usize) -> usize {
    let mut blocks = Vec::new();
    let mut running = v[i];
    for (m, &x) in v.iter().enumerate().take(j + 1).skip(i + 1) {
        if x > running {
            running = x;
            let block = (m - i + 1).ilog2();
            if blocks.last() != Some(&block) {
                blocks.push(block);
            }
        }
    }
    blocks.len()
}

fn rises<T: Scalar>(v: &[T], th: &TrendThresholds) -> bool {
    let (i, j, rise) = max_drawup(v);
    rise >= T::lit(th.drift_nats) && record_blocks(v, i, j) >= th.min_windows
}

/// Classifies a log-ratio sequence.
///
/// The sequence rises (falls) when its largest drawup (drawdown) reaches
/// `drift_nats` and the running extreme along it sets records in at least
/// `min_windows` dyadic blocks. Rising and falling together is
/// `Oscillating`. Otherwise the sequence counts as bounded when both swings
/// over its second half stay below `drift_nats / 4`.
pub fn classify_trend<T: Scalar>(
    values: &[T],
    th: &TrendThresholds,
) -> Result<Trend, OscillationError> {
    th.validate()?;
    if values.len() < th.min_points {
        return Err(OscillationError::TooShort {
            len: values.len(),
            min: th.min_points,
        });
    }
    let negated: Vec<T> = values.iter().map(|&v| -v).collect();
    let up = rises(values, th);
    let down = rises(&negated, th);
    Ok(match (up, down) {
        (true, true) => Trend::Oscillating,
        (true, false) => Trend::DivergesUp,
        (false, true) => Trend::DivergesDown,
        (false, false) => {
            let half = values.len() / 2;
            let quarter = T::lit(th.drift_nats / 4.0);
            if max_drawup(&values[half..]).2 < quarter && max_drawup(&negated[half..]).2 < quarter {
                Trend::BoundedBelow
            } else {
                Trend::Undecided
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness<T> {
    pub index: usize,
    pub log_ratio: T,
}

/// Finite evidence that `ℓ` is unbounded in both directions: a ladder of
/// successive maxima and a ladder of successive minima, each rung at least
/// one nat beyond the previous.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationCertificate<T> {
    pub window: Window,
    pub up_witnesses: Vec<Witness<T>>,
    pub down_witnesses: Vec<Witness<T>>,
    /// Grid indices nearest the crests `sin(ln(Δn + a)) = 1` of the source
    /// curve, when its parameters are known.
    pub up_targets: Vec<usize>,
    /// Grid indices nearest the troughs `sin(ln(Δn + a)) = -1`.
    pub down_targets: Vec<usize>,
}

pub const MIN_WITNESSES: usize = 5;
const RUNG_NATS: f64 = 1.0;

impl<T: Scalar> OscillationCertificate<T> {
    /// Checks the ladder invariants and re-evaluates every witness from the
    /// two spectra.
    pub fn verify(&self, a: &SchmidtSpectrum<T>, b: &SchmidtSpectrum<T>) -> bool {
        let (ga, gb) = (tail_function(a), tail_function(b));
        let tol = T::lit(1e-12);
        let reproduces = |w: &Witness<T>| {
            w.index < ga.len()
                && w.index < gb.len()
                && (ga.log_g()[w.index] - gb.log_g()[w.index] - w.log_ratio).abs() <= tol
        };
        let rung = T::lit(RUNG_NATS);
        let climbs = |ws: &[Witness<T>], sign: T| {
            ws.len() >= MIN_WITNESSES
                && ws.windows(2).all(|p| {
                    p[0].index < p[1].index && (p[1].log_ratio - p[0].log_ratio) * sign >= rung
                })
        };
        climbs(&self.up_witnesses, T::one())
            && climbs(&self.down_witnesses, -T::one())
            && self
                .up_witnesses
                .iter()
                .chain(&self.down_witnesses)
                .all(reproduces)
    }

    /// The certificate for the swapped pair `(b, a)`.
    pub fn swapped(&self) -> Self {
        let neg = |ws: &[Witness<T>]| {
            ws.iter()
                .map(|w| Witness {
                    index: w.index,
                    log_ratio: -w.log_ratio,
                })
                .collect()
        };
        OscillationCertificate {
            window: self.window,
            up_witnesses: neg(&self.down_witnesses),
            down_witnesses: neg(&self.up_witnesses),
            up_targets: self.down_targets.clone(),
            down_targets: self.up_targets.clone(),
        }
    }
}

/// Greedy rungs from `base` to the maximum after it: the base, then each
/// first point one nat above the previous rung, with the final rung moved
/// to the peak.
fn ladder_from<T: Scalar>(v: &[T], base: usize) -> Vec<usize> {
    let rung = T::lit(RUNG_NATS);
    let mut peak = base;
    for (m, &x) in v.iter().enumerate().skip(base + 1) {
        if x > v[peak] {
            peak = m;
        }
    }
    let mut rungs = vec![base];
    for (m, &x) in v.iter().enumerate().take(peak + 1).skip(base + 1) {
        if x >= v[*rungs.last().unwrap()] + rung {
            rungs.push(m);
        }
    }
    if rungs.len() > 1 {
        *rungs.last_mut().unwrap() = peak;
    }
    rungs
}

/// Longest greedy ladder over candidate bases: the start of the largest
/// drawup and the minimum of every dyadic block `[2^b - 1, 2^{b+1} - 2]`.
/// Ties go to the earliest base.
fn ladder<T: Scalar>(v: &[T]) -> Vec<usize> {
    if v.len() < 2 {
        return Vec::new();
    }
    let mut bases = vec![max_drawup(v).0];
    let mut lo = 0;
    while lo < v.len() {
        let hi = (2 * lo + 1).min(v.len());
        let mut best = lo;
        for m in lo + 1..hi {
            if v[m] < v[best] {
                best = m;
            }
        }
        bases.push(best);
        lo = hi;
    }
    bases.sort_unstable();
    bases.dedup();
    let mut best: Vec<usize> = Vec::new();
    for b in bases {
        let l = ladder_from(v, b);
        if l.len() > best.len() {
            best = l;
        }
    }
    if best.len() < 2 {
        Vec::new()
    } else {
        best
    }
}

/// Grid indices in the window nearest to `x = e^{phase + 2πp}` on the
/// curve `x = Δn + a`, for the targets the grid can resolve.
fn phase_targets(delta: f64, offset: f64, window: Window, phase: f64) -> Vec<usize> {
    let lo = delta * window.start as f64 + offset;
    let hi = delta * window.end as f64 + offset;
    if !(lo > 0.0 && hi > lo && delta > 0.0) {
        return Vec::new();
    }
    let first = ((lo.ln() - phase) / (2.0 * PI)).ceil() as i64;
    let mut out = Vec::new();
    let mut p = first;
    loop {
        let x = (phase + 2.0 * PI * p as f64).exp();
        if x > hi {
            break;
        }
        p += 1;
        // Where Δ exceeds x the grid skips whole periods of sin(ln x).
        if x < delta {
            continue;
        }
        let n = ((x - offset) / delta).round().max(0.0) as usize;
        let n = n.clamp(window.start, window.end);
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    out
}

fn curve_targets<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    window: Window,
) -> (Vec<usize>, Vec<usize>) {
    let params = |s: &SchmidtSpectrum<T>| {
        let family = s.metadata().get("family")?;
        if family != "psi" && family != "xi" {
            return None;
        }
        Some((
            s.meta_value("delta")?.to_f64()?,
            s.meta_value("offset")?.to_f64()?,
        ))
    };
    match params(a).or_else(|| params(b)) {
        Some((delta, offset)) => (
            phase_targets(delta, offset, window, PI / 2.0),
            phase_targets(delta, offset, window, 1.5 * PI),
        ),
        None => (Vec::new(), Vec::new()),
    }
}

/// Searches `ℓ` for witness ladders in both directions. Returns `Ok(None)`
/// when either ladder has fewer than five rungs.
pub fn incomparability_certificate<T: Scalar>(
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    window: Option<Window>,
    th: &TrendThresholds,
) -> Result<Option<OscillationCertificate<T>>, OscillationError> {
    th.validate()?;
    let seq = log_ratio_sequence(a, b, window, th)?;
    certificate_from_sequence(&seq, a, b, th)
}

pub(crate) fn certificate_from_sequence<T: Scalar>(
    seq: &LogRatioSequence<T>,
    a: &SchmidtSpectrum<T>,
    b: &SchmidtSpectrum<T>,
    th: &TrendThresholds,
) -> Result<Option<OscillationCertificate<T>>, OscillationError> {
    if seq.values.len() < th.min_points {
        return Err(OscillationError::TooShort {
            len: seq.values.len(),
            min: th.min_points,
        });
    }
    let negated = seq.negated();
    let up = ladder(&seq.values);
    let down = ladder(&negated.values);
    if up.len() < MIN_WITNESSES || down.len() < MIN_WITNESSES {
        return Ok(None);
    }
    let start = seq.window.start;
    let witnesses = |idx: &[usize]| {
        idx.iter()
            .map(|&i| Witness {
                index: start + i,
                log_ratio: seq.values[i],
            })
            .collect()
    };
    let (up_targets, down_targets) = curve_targets(a, b, seq.window);
    Ok(Some(OscillationCertificate {
        window: seq.window,
        up_witnesses: witnesses(&up),
        down_witnesses: witnesses(&down),
        up_targets,
        down_targets,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{eval_p, psi, tmss, OffsetSearch};

    fn th() -> TrendThresholds {
        TrendThresholds::default()
    }

    #[test]
    fn linear_descent_diverges_down() {
        let v: Vec<f64> = (0..100).map(|n| -0.1 * n as f64).collect();
        assert_eq!(classify_trend(&v, &th()).unwrap(), Trend::DivergesDown);
        let up: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(classify_trend(&up, &th()).unwrap(), Trend::DivergesUp);
    }

    #[test]
    fn constant_is_bounded() {
        assert_eq!(
            classify_trend(&[2.5; 64], &th()).unwrap(),
            Trend::BoundedBelow
        );
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            classify_trend(&[0.0; 63], &th()),
            Err(OscillationError::TooShort { len: 63, min: 64 })
        ));
    }

    #[test]
    fn single_jump_is_not_divergence() {
        let mut v = vec![0.0; 200];
        for x in v.iter_mut().skip(20) {
            *x = 10.0;
        }
        assert_eq!(classify_trend(&v, &th()).unwrap(), Trend::BoundedBelow);
        for x in v.iter_mut().skip(150) {
            *x = 20.0;
        }
        assert_eq!(classify_trend(&v, &th()).unwrap(), Trend::Undecided);
    }

    #[test]
    fn log_p_is_oscillating() {
        let (delta, a) = (1e6, 1.01);
        let v: Vec<f64> = (0..=10_000)
            .map(|n| eval_p(1.0, delta * n as f64 + a).unwrap().value.ln())
            .collect();
        assert_eq!(classify_trend(&v, &th()).unwrap(), Trend::Oscillating);
    }

    #[test]
    fn tmss_ratio_is_linear() {
        let (a, b) = (tmss(0.6, 600).unwrap(), tmss(0.4, 600).unwrap());
        let seq = log_ratio_sequence(&a, &b, Some(Window::new(0, 500)), &th()).unwrap();
        for (n, v) in seq.iter() {
            let expected = 2.0 * n as f64 * (0.6f64.ln() - 0.4f64.ln());
            assert!((v - expected).abs() < 1e-9 * (1.0 + expected.abs()));
        }
        assert_eq!(
            classify_trend(&seq.values, &th()).unwrap(),
            Trend::DivergesUp
        );
    }

    #[test]
    fn truncation_is_checked() {
        // tail / g(n) = 0.81^(200 - n) stays below 1e-6 up to n = 134.
        let a = tmss(0.9, 200).unwrap();
        let err = log_ratio_sequence(&a, &a, Some(Window::new(0, 150)), &th()).unwrap_err();
        assert!(matches!(
            err,
            OscillationError::TruncationUnsafe { index: 135, .. }
        ));
        assert_eq!(default_window(&a, &a, &th()).unwrap(), Window::new(0, 134));
        assert!(matches!(
            log_ratio_sequence(&a, &a, Some(Window::new(0, 260)), &th()),
            Err(OscillationError::WindowOutOfRange { .. })
        ));
        let short = tmss(0.9, 50).unwrap();
        assert!(default_window(&short, &short, &th()).is_err());
    }

    #[test]
    fn psi_pair_certificate() {
        let search = OffsetSearch::default();
        let p2 = psi(2, 1e6, 10_000, &search).unwrap();
        let p1 = psi(1, 1e6, 10_000, &search).unwrap();
        let cert = incomparability_certificate(&p2, &p1, None, &th())
            .unwrap()
            .unwrap();
        assert!(cert.up_witnesses.len() >= 5 && cert.down_witnesses.len() >= 5);
        assert!(cert.verify(&p2, &p1));
        assert!(!cert.up_targets.is_empty() && !cert.down_targets.is_empty());
        let back = incomparability_certificate(&p1, &p2, None, &th())
            .unwrap()
            .unwrap();
        assert_eq!(back.up_witnesses, cert.swapped().up_witnesses);
        assert_eq!(back.down_witnesses, cert.swapped().down_witnesses);
        assert!(back.verify(&p1, &p2));
    }

    #[test]
    fn no_certificate_for_ordered_pair() {
        let (a, b) = (tmss(0.6, 600).unwrap(), tmss(0.4, 600).unwrap());
        assert!(
            incomparability_certificate(&a, &b, Some(Window::new(0, 500)), &th())
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn targets_hit_phases() {
        let t = phase_targets(1e6, 1.0, Window::new(0, 10_000), PI / 2.0);
        for n in t {
            let l = (1e6 * n as f64 + 1.0).ln();
            assert!(l.sin() > 0.9, "n = {n}");
        }
    }
}
