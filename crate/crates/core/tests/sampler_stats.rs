//! Statistical checks of the ensemble sampler against targets whose
//! moments are known in closed form or by quadrature.

use kincal::calibration::{PriorEntry, PriorSpec};
use kincal::sampler::{draw_stretch, init_ensemble, sweep, EnsembleState, LogDensity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Fn1<F>(usize, F);

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for Fn1<F> {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (self.1)(x)
    }
}

/// Composite Simpson rule on [lo, hi] with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn gaussian_start(walkers: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..walkers)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Runs `sweeps` sweeps, handing every walker position after each sweep
/// to `visit`.
fn drive<D: LogDensity>(target: &D, start: Vec<Vec<f64>>, a: f64, seed: u64, sweeps: u64, mut visit: impl FnMut(u64, &EnsembleState)) -> f64 {
    let mut state = EnsembleState::from_walkers(target, start);
    let mut moved = 0usize;
    for _ in 0..sweeps {
        moved += sweep(&mut state, target, a, seed).iter().filter(|&&m| m).count();
        visit(state.sweep, &state);
    }
    moved as f64 / (sweeps as usize * state.len()) as f64
}

/// Mean and its standard error from non-overlapping batch means of a series.
fn batch_mean(series: &[f64], batches: usize) -> (f64, f64) {
    let n = series.len() / batches;
    let means: Vec<f64> = series
        .chunks(n)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

#[test]
fn stretch_factor_follows_inverse_square_root_density() {
    let a = 2.0;
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut z: Vec<f64> = (0..n).map(|_| draw_stretch(&mut rng, a)).collect();
    assert!(z.iter().all(|&x| x >= 1.0 / a && x <= a));

    let norm = simpson(|x| x.powf(-0.5), 1.0 / a, a, 2000);
    let expect = simpson(|x| x * x.powf(-0.5), 1.0 / a, a, 2000) / norm;
    let mean = z.iter().sum::<f64>() / n as f64;
    let var = simpson(|x| (x - expect).powi(2) * x.powf(-0.5), 1.0 / a, a, 2000) / norm;
    let se = (var / n as f64).sqrt();
    assert!((mean - expect).abs() < 4.0 * se, "mean {mean} vs {expect} (se {se})");

    // Kolmogorov-Smirnov against the CDF by quadrature at 40 knots.
    z.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    for i in 1..40 {
        let x = 1.0 / a + (a - 1.0 / a) * i as f64 / 40.0;
        let cdf = simpson(|t| t.powf(-0.5), 1.0 / a, x, 400) / norm;
        let emp = z.partition_point(|&v| v <= x) as f64 / n as f64;
        worst = worst.max((emp - cdf).abs());
    }
    assert!(worst < 1.63 / (n as f64).sqrt(), "KS distance {worst}");
}

#[test]
fn standard_normal_moments() {
    let target = Fn1(2, |x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1]));
    let (walkers, sweeps, burn) = (10, 100_000u64, 1_000u64);
    // Per-sweep ensemble averages; their autocorrelation is handled by
    // batching.
    let mut m = [Vec::new(), Vec::new()];
    let mut second = [[0.0; 2]; 2];
    let mut count = 0.0;
    drive(&target, gaussian_start(walkers, 2, 1), 2.0, 23, sweeps, |t, s| {
        if t <= burn {
            return;
        }
        for d in 0..2 {
            m[d].push(s.walkers.iter().map(|w| w[d]).sum::<f64>() / walkers as f64);
        }
        for w in &s.walkers {
            for i in 0..2 {
                for j in 0..2 {
                    second[i][j] += w[i] * w[j];
                }
            }
            count += 1.0;
        }
    });
    for (d, series) in m.iter().enumerate() {
        let (mean, se) = batch_mean(series, 50);
        assert!(mean.abs() < 3.0 * se, "mean[{d}] = {mean}, se {se}");
    }
    for i in 0..2 {
        for j in 0..2 {
            let c = second[i][j] / count;
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 0.05, "cov[{i}][{j}] = {c}");
        }
    }
}

#[test]
fn double_well_mode_weights_match_quadrature() {
    // Asymmetric wells along x with a standard normal in y.
    let lp = |x: f64| -2.0 * (x * x - 1.0).powi(2) + 0.4 * x;
    let target = Fn1(2, move |v: &[f64]| lp(v[0]) - 0.5 * v[1] * v[1]);
    let right = simpson(|x| lp(x).exp(), 0.0, 6.0, 6000);
    let total = right + simpson(|x| lp(x).exp(), -6.0, 0.0, 6000);
    let want = right / total;

    let walkers = 32;
    let mut start = gaussian_start(walkers, 2, 4);
    for (k, w) in start.iter_mut().enumerate() {
        w[0] = if k % 2 == 0 { 1.0 } else { -1.0 } + 0.1 * w[0];
    }
    let mut frac = Vec::new();
    drive(&target, start, 2.0, 29, 60_000, |t, s| {
        if t > 2_000 {
            frac.push(s.walkers.iter().filter(|w| w[0] > 0.0).count() as f64 / walkers as f64);
        }
    });
    let (got, se) = batch_mean(&frac, 40);
    assert!((got / want - 1.0).abs() < 0.05, "right-well mass {got} vs {want} (se {se})");
}

#[test]
fn binned_occupancy_passes_chi_square() {
    // Independent Beta(2, 2) coordinates on the unit square.
    let target = Fn1(2, |x: &[f64]| {
        if x.iter().all(|&v| v > 0.0 && v < 1.0) {
            x.iter().map(|&v| (v * (1.0 - v)).ln()).sum()
        } else {
            f64::NEG_INFINITY
        }
    });
    let walkers = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start: Vec<Vec<f64>> = (0..walkers)
        .map(|_| (0..2).map(|_| rand::Rng::gen_range(&mut rng, 0.2..0.8)).collect())
        .collect();
    let bins = 10;
    let mut counts = vec![0u64; bins];
    // Thinned well past the integrated time so draws are near independent.
    drive(&target, start, 2.0, 31, 40_000, |t, s| {
        if t > 500 && t % 25 == 0 {
            for w in &s.walkers {
                counts[((w[0] * bins as f64) as usize).min(bins - 1)] += 1;
            }
        }
    });
    let n: u64 = counts.iter().sum();
    let cdf = |x: f64| 3.0 * x * x - 2.0 * x * x * x;
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let p = cdf((b + 1) as f64 / bins as f64) - cdf(b as f64 / bins as f64);
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let limit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < limit, "chi-square {chi2} over {n} draws exceeds {limit}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let target = Fn1(3, |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>());
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut state = EnsembleState::from_walkers(&target, gaussian_start(12, 3, 2));
            for _ in 0..200 {
                sweep(&mut state, &target, 2.0, 77);
            }
            state
        })
    };
    assert_eq!(run(1), run(4));
}

fn flat() -> Fn1<impl Fn(&[f64]) -> f64 + Sync> {
    Fn1(2, |_: &[f64]| 0.0)
}

#[test]
fn initial_spread_is_a_tenth_of_the_prior_width() {
    let prior = PriorSpec {
        entries: vec![
            PriorEntry { mean: 5.0, sigma: 2.0, lower: -100.0, upper: 100.0 },
            PriorEntry { mean: 1e13, sigma: 4e12, lower: 0.0, upper: 1e15 },
        ],
    };
    let n = 10_000;
    let state = init_ensemble(&prior, n, 12, &flat()).unwrap();
    for (d, e) in prior.entries.iter().enumerate() {
        let xs: Vec<f64> = state.walkers.iter().map(|w| w[d]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd / (e.sigma / 10.0) - 1.0).abs() < 0.05, "sd {sd}");
        assert!((mean - e.mean).abs() < 4.0 * sd / (n as f64).sqrt(), "mean {mean}");
    }
}

#[test]
fn initial_draws_respect_a_bound_at_the_mean() {
    let sigma = 3.0;
    let prior = PriorSpec {
        entries: vec![
            PriorEntry { mean: 10.0, sigma, lower: 10.0, upper: 1e3 },
            PriorEntry { mean: 0.0, sigma: 1.0, lower: -1.0, upper: 1.0 },
        ],
    };
    let n = 10_000;
    let state = init_ensemble(&prior, n, 13, &flat()).unwrap();
    let xs: Vec<f64> = state.walkers.iter().map(|w| w[0]).collect();
    assert!(xs.iter().all(|&x| x >= 10.0));
    // Half-normal with scale sigma/10.
    let s = sigma / 10.0;
    let want = 10.0 + s * (2.0 / std::f64::consts::PI).sqrt();
    let sd = s * (1.0 - 2.0 / std::f64::consts::PI).sqrt();
    let mean = xs.iter().sum::<f64>() / n as f64;
    assert!((mean - want).abs() < 4.0 * sd / (n as f64).sqrt(), "mean {mean} vs {want}");
}

#[test]
fn initial_draws_avoid_minus_infinity() {
    let prior = PriorSpec {
        entries: vec![
            PriorEntry { mean: 0.0, sigma: 10.0, lower: -50.0, upper: 50.0 },
            PriorEntry { mean: 0.0, sigma: 10.0, lower: -50.0, upper: 50.0 },
        ],
    };
    let half_plane = Fn1(2, |x: &[f64]| if x[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY });
    let state = init_ensemble(&prior, 64, 3, &half_plane).unwrap();
    assert!(state.walkers.iter().all(|w| w[0] > 0.0));
    let nowhere = Fn1(2, |_: &[f64]| f64::NEG_INFINITY);
    assert!(init_ensemble(&prior, 8, 3, &nowhere).is_err());
}
