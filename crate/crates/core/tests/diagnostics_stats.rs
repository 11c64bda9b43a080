//! Diagnostics on synthetic draws whose distribution is known exactly.

use kincal::diagnostics::{self, Samples};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

/// `records × walkers` independent draws of (mean + sd·z₁, ρ·z₁ + √(1−ρ²)·z₂).
fn gaussian_block(records: usize, walkers: usize, mean: f64, sd: f64, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(records * walkers * 2);
    for _ in 0..records * walkers {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        out.push(mean + sd * z1);
        out.push(rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    }
    out
}

#[test]
fn summary_of_gaussian_draws_matches_the_distribution() {
    let (records, walkers) = (4000, 50);
    let (mean, sd) = (3.0, 0.5);
    let data = gaussian_block(records, walkers, mean, sd, 0.3, 9);
    let samples = Samples::new(records, walkers, 2, &data);
    let s = diagnostics::summarize(&samples, 1000).unwrap();
    let n = (records - 1000) * walkers;
    assert_eq!(s.n_samples, n);

    let p = &s.params[0];
    let se = sd / (n as f64).sqrt();
    assert!((p.mean - mean).abs() < 3.0 * se, "mean {}", p.mean);
    // Standard error of a sample sd is about sd / sqrt(2n).
    assert!((p.std - sd).abs() < 3.0 * sd / (2.0 * n as f64).sqrt(), "std {}", p.std);
    let normal = Normal::new(mean, sd).unwrap();
    for (q, level) in p.quantiles.iter().zip(diagnostics::QUANTILE_LEVELS) {
        let want = normal.inverse_cdf(level);
        assert!((q - want).abs() < 0.01, "q{level}: {q} vs {want}");
    }
    assert!((p.mode - mean).abs() < 0.1, "mode {}", p.mode);
    assert!((s.correlation[0][1] - 0.3).abs() < 0.01);
    assert!((s.covariance[0][1] - 0.3 * sd).abs() < 0.01);
}

#[test]
fn binned_correlation_recovers_rho() {
    let (records, walkers) = (2000, 20);
    let data = gaussian_block(records, walkers, 0.0, 1.0, 0.8, 10);
    let samples = Samples::new(records, walkers, 2, &data);
    let grid = diagnostics::triangle_data(&samples, 0, &[0, 1], 30, &[1.0, 1.0]).unwrap();
    assert_eq!(grid.hist2d.len(), 1);
    let r = grid.binned_correlation(0);
    assert!((r - 0.8).abs() < 0.05, "binned correlation {r}");
    // The raw sample correlation is far tighter; binning costs a little.
    let s = diagnostics::summarize(&samples, 0).unwrap();
    assert!((s.correlation[0][1] - 0.8).abs() < 0.01);
}

#[test]
fn histogram_axes_are_in_units_of_the_prior_mean() {
    let data = gaussian_block(500, 10, 2e13, 1e12, 0.0, 11);
    let samples = Samples::new(500, 10, 2, &data);
    let grid = diagnostics::triangle_data(&samples, 0, &[0], 20, &[1e13, 1.0]).unwrap();
    let ax = &grid.axes[0];
    assert_eq!(ax.scale, 1e13);
    assert!(ax.lo > 1.4 && ax.hi < 2.6, "axis [{}, {}]", ax.lo, ax.hi);
    let edges = ax.edges(20);
    assert_eq!(edges.len(), 21);
    assert_eq!(edges[0], ax.lo);
    assert!((edges[20] - ax.hi).abs() <= 1e-15 * ax.hi);
}

/// Independent AR(1) series with coefficient `phi` in every walker.
fn ar1(records: usize, walkers: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; walkers];
    let scale = (1.0 - phi * phi).sqrt();
    for v in &mut x {
        *v = StandardNormal.sample(&mut rng);
    }
    let mut out = Vec::with_capacity(records * walkers);
    for _ in 0..records {
        for v in &mut x {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v = phi * *v + scale * e;
            out.push(*v);
        }
    }
    out
}

#[test]
fn integrated_time_of_ar1_matches_theory() {
    let phi: f64 = 0.8;
    let (records, walkers) = (50_000, 8);
    let data = ar1(records, walkers, phi, 12);
    let samples = Samples::new(records, walkers, 1, &data);
    let ac = diagnostics::autocovariance(&samples, 0, 200).unwrap();
    let rho = ac.params[0].rho.as_ref().unwrap();
    for s in 1..10 {
        assert!((rho[s] - phi.powi(s as i32)).abs() < 0.02, "rho[{s}] = {}", rho[s]);
    }
    let tau = diagnostics::integrated_time(rho, 5.0).unwrap();
    let want = (1.0 + phi) / (1.0 - phi);
    assert!((tau / want - 1.0).abs() < 0.1, "tau {tau} vs {want}");
}

#[test]
fn constant_parameter_has_no_autocorrelation_curve() {
    let mut data = ar1(100, 4, 0.5, 13);
    let constant = vec![7.0; 400];
    let mut both = Vec::with_capacity(800);
    for (x, c) in data.drain(..).zip(constant) {
        both.push(x);
        both.push(c);
    }
    let samples = Samples::new(100, 4, 2, &both);
    let ac = diagnostics::autocovariance(&samples, 10, 20).unwrap();
    assert!(ac.params[0].rho.is_some());
    assert!(ac.params[1].rho.is_none());
    assert_eq!(ac.params[1].c0, 0.0);
    let s = diagnostics::summarize(&samples, 10).unwrap();
    assert_eq!(s.params[1].mode, 7.0);
    assert_eq!(s.correlation[0][1], 0.0);
}

#[test]
fn lag_window_must_fit_after_burn_in() {
    let data = ar1(50, 4, 0.5, 14);
    let samples = Samples::new(50, 4, 1, &data);
    assert!(diagnostics::autocovariance(&samples, 25, 25).is_err());
    assert!(diagnostics::autocovariance(&samples, 25, 24).is_ok());
    assert!(diagnostics::summarize(&samples, 50).is_err());
    assert_eq!(diagnostics::default_burn_in(50), 25);
    assert_eq!(diagnostics::default_s_max(50, 25), 5);
    assert_eq!(diagnostics::default_s_max(100_000, 0), 1000);
}
