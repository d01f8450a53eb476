//! Convertibility decisions checked against direct linear-domain computations
//! on seeded random finite spectra.

use entanglement_order::{locc_convertible, max_probability, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_weights(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rank = rng.gen_range(1..=8);
    let raw: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    w.sort_by(|a, b| b.partial_cmp(a).unwrap());
    w
}

/// Coarse-graining a spectrum (merging two weights) always yields a target
/// reachable by LOCC, with ties in the partial sums.
fn merged(w: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    if w.len() < 2 {
        return w.to_vec();
    }
    let i = rng.gen_range(0..w.len() - 1);
    let mut out = w.to_vec();
    let x = out.remove(i + 1);
    out[i] += x;
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    out
}

fn linear_tails(w: &[f64]) -> Vec<f64> {
    (0..w.len()).map(|n| w[n..].iter().sum()).collect()
}

fn brute_probability(a: &[f64], b: &[f64]) -> f64 {
    let (ga, gb) = (linear_tails(a), linear_tails(b));
    let mut best: f64 = 1.0;
    for (n, den) in gb.iter().enumerate() {
        let num = ga.get(n).copied().unwrap_or(0.0);
        best = best.min(num / den);
    }
    best.clamp(0.0, 1.0)
}

fn majorized(a: &[f64], b: &[f64]) -> bool {
    let len = a.len().max(b.len());
    let (mut sa, mut sb) = (0.0, 0.0);
    for n in 0..len {
        sa += a.get(n).copied().unwrap_or(0.0);
        sb += b.get(n).copied().unwrap_or(0.0);
        if sa > sb + 1e-12 {
            return false;
        }
    }
    true
}

fn pairs(seed: u64, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let a = random_weights(&mut rng);
            let b = if i % 5 == 0 {
                merged(&a, &mut rng)
            } else {
                random_weights(&mut rng)
            };
            (a, b)
        })
        .collect()
}

fn spectrum(w: &[f64]) -> Spectrum {
    Spectrum::build(w, true).unwrap()
}

#[test]
fn probability_matches_brute_force() {
    let mut ones = 0;
    for (a, b) in pairs(7, 1000) {
        let (sa, sb) = (spectrum(&a), spectrum(&b));
        let p = max_probability(&sa, &sb).unwrap();
        let q = brute_probability(&a, &b);
        assert!((p - q).abs() <= 1e-12, "{a:?} -> {b:?}: {p} vs {q}");
        let maj = majorized(&a, &b);
        assert_eq!(p == 1.0, maj, "{a:?} -> {b:?}");
        assert_eq!(locc_convertible(&sa, &sb).unwrap(), maj);
        ones += usize::from(maj);
    }
    assert!(ones >= 200, "only {ones} convertible pairs");
}

#[test]
fn probability_is_monotone_under_locc() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for (a, b) in pairs(13, 400) {
        let (sa, sb) = (spectrum(&a), spectrum(&b));
        if !locc_convertible(&sa, &sb).unwrap() {
            continue;
        }
        for _ in 0..5 {
            let t = spectrum(&random_weights(&mut rng));
            let pa = max_probability(&sa, &t).unwrap();
            let pb = max_probability(&sb, &t).unwrap();
            assert!(pa >= pb - 1e-12, "{a:?} {b:?}: {pa} < {pb}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}
