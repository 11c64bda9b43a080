//! Chain post-processing: walker-averaged autocorrelation, summary
//! statistics and triangle-plot histograms.
//!
//! All functions operate on a [`Samples`] view of shape
//! `records × walkers × params`, so synthetic series can be analysed the
//! same way as sampler output.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::sampler::Chain;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("burn-in {burn_in} leaves no samples out of {records} records")]
    EmptyWindow { burn_in: usize, records: usize },
    #[error("burn-in {burn_in} plus max lag {s_max} must be below {records} records")]
    LagTooLong {
        burn_in: usize,
        s_max: usize,
        records: usize,
    },
    #[error("at least 2 bins are required")]
    TooFewBins,
    #[error("parameter index {0} out of range")]
    BadIndex(usize),
}

/// Borrowed `records × walkers × params` sample block.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub records: usize,
    pub walkers: usize,
    pub params: usize,
    pub data: &'a [f64],
}

impl<'a> Samples<'a> {
    pub fn new(records: usize, walkers: usize, params: usize, data: &'a [f64]) -> Self {
        assert_eq!(data.len(), records * walkers * params, "sample block shape");
        Self {
            records,
            walkers,
            params,
            data,
        }
    }

    pub fn from_chain(chain: &'a Chain) -> Self {
        Self::new(chain.stored(), chain.n_walkers, chain.dim, &chain.positions)
    }

    #[inline]
    pub fn get(&self, record: usize, walker: usize, param: usize) -> f64 {
        self.data[(record * self.walkers + walker) * self.params + param]
    }

    fn window(&self, burn_in: usize) -> Result<usize, DiagnosticsError> {
        if burn_in >= self.records {
            return Err(DiagnosticsError::EmptyWindow {
                burn_in,
                records: self.records,
            });
        }
        Ok(self.records - burn_in)
    }

    /// All post-burn-in values of one parameter, walker-major order.
    fn column(&self, burn_in: usize, param: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity((self.records - burn_in) * self.walkers);
        for r in burn_in..self.records {
            for k in 0..self.walkers {
                v.push(self.get(r, k, param));
            }
        }
        v
    }
}

/// Default burn-in: the first half of the stored records.
pub fn default_burn_in(records: usize) -> usize {
    records / 2
}

/// Default maximum lag: `min(1000, (T - T_b) / 5)`.
pub fn default_s_max(records: usize, burn_in: usize) -> usize {
    1000.min(records.saturating_sub(burn_in) / 5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamAutocorr {
    /// Walker-averaged lag-zero autocovariance.
    pub c0: f64,
    /// `rho[s]` for `s = 0..=s_max`; `None` when the series is constant.
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrResult {
    pub burn_in: usize,
    pub s_max: usize,
    pub params: Vec<ParamAutocorr>,
}

fn walker_autocov(x: &[f64], s_max: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=s_max)
        .map(|s| {
            let m = n - s;
            d[..m].iter().zip(&d[s..]).map(|(a, b)| a * b).sum::<f64>() / m as f64
        })
        .collect()
}

/// Autocovariance per walker (own mean removed), averaged over walkers,
/// then normalised by the lag-zero value.
pub fn autocovariance(
    samples: &Samples,
    burn_in: usize,
    s_max: usize,
) -> Result<AutocorrResult, DiagnosticsError> {
    if burn_in + s_max >= samples.records {
        return Err(DiagnosticsError::LagTooLong {
            burn_in,
            s_max,
            records: samples.records,
        });
    }
    let params = (0..samples.params)
        .into_par_iter()
        .map(|i| {
            let mut c = vec![0.0; s_max + 1];
            for k in 0..samples.walkers {
                let x: Vec<f64> = (burn_in..samples.records)
                    .map(|r| samples.get(r, k, i))
                    .collect();
                for (acc, v) in c.iter_mut().zip(walker_autocov(&x, s_max)) {
                    *acc += v;
                }
            }
            for v in &mut c {
                *v /= samples.walkers as f64;
            }
            let c0 = c[0];
            let rho = (c0 > 0.0).then(|| {
                let mut r: Vec<f64> = c.iter().map(|v| v / c0).collect();
                r[0] = 1.0;
                r
            });
            ParamAutocorr { c0, rho }
        })
        .collect();
    Ok(AutocorrResult {
        burn_in,
        s_max,
        params,
    })
}

/// Integrated autocorrelation time with a self-consistent window: the sum
/// `1 + 2 Σ ρ_s` is truncated at the first `M ≥ c·τ(M)`. Returns `None`
/// when no such window fits within the computed lags.
pub fn integrated_time(rho: &[f64], c: f64) -> Option<f64> {
    let mut tau = 1.0;
    for (m, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if m as f64 >= c * tau {
            return Some(tau);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub mean: f64,
    pub std: f64,
    /// 5, 25, 50, 75 and 95 percent quantiles.
    pub quantiles: [f64; 5],
    /// Centre of the fullest histogram bin.
    pub mode: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n_samples: usize,
    pub params: Vec<ParamSummary>,
    pub covariance: Vec<Vec<f64>>,
    pub correlation: Vec<Vec<f64>>,
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];
const MODE_BINS: usize = 50;

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn histogram_mode(sorted: &[f64]) -> f64 {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return lo;
    }
    let mut counts = [0usize; MODE_BINS];
    for &x in sorted {
        counts[bin_index(x, lo, hi, MODE_BINS)] += 1;
    }
    let best = (0..MODE_BINS).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
    lo + (best as f64 + 0.5) * (hi - lo) / MODE_BINS as f64
}

pub fn summarize(samples: &Samples, burn_in: usize) -> Result<Summary, DiagnosticsError> {
    samples.window(burn_in)?;
    let cols: Vec<Vec<f64>> = (0..samples.params)
        .into_par_iter()
        .map(|i| samples.column(burn_in, i))
        .collect();
    let n = cols.first().map_or(0, Vec::len);
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let p = samples.params;
    let denom = (n.max(2) - 1) as f64;
    let mut cov = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            cov[i][j] = s / denom;
            cov[j][i] = cov[i][j];
        }
    }
    let mut corr = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            corr[i][j] = if i == j {
                1.0
            } else {
                let d = (cov[i][i] * cov[j][j]).sqrt();
                if d > 0.0 {
                    cov[i][j] / d
                } else {
                    0.0
                }
            };
        }
    }
    let params = cols
        .into_par_iter()
        .enumerate()
        .map(|(i, mut c)| {
            c.sort_by(f64::total_cmp);
            let mut quantiles = [0.0; 5];
            for (q, level) in quantiles.iter_mut().zip(QUANTILE_LEVELS) {
                *q = quantile_sorted(&c, level);
            }
            ParamSummary {
                mean: means[i],
                std: cov[i][i].sqrt(),
                quantiles,
                mode: histogram_mode(&c),
            }
        })
        .collect();
    Ok(Summary {
        n_samples: n,
        params,
        covariance: cov,
        correlation: corr,
    })
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let f = (x - lo) / (hi - lo) * bins as f64;
    (f.floor().max(0.0) as usize).min(bins - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: usize,
    /// Values are divided by this before binning.
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Axis {
    pub fn edges(&self, bins: usize) -> Vec<f64> {
        (0..=bins)
            .map(|b| self.lo + (self.hi - self.lo) * b as f64 / bins as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramGrid {
    pub bins: usize,
    pub n_samples: usize,
    pub axes: Vec<Axis>,
    /// `hist1d[a][b]` for axis `a`.
    pub hist1d: Vec<Vec<u64>>,
    /// `((a, b), counts)` for axis pairs `b < a`; `counts[x][y]` with x on
    /// axis `a` and y on axis `b`.
    pub hist2d: Vec<((usize, usize), Vec<Vec<u64>>)>,
}

impl HistogramGrid {
    /// Correlation estimated from 2D bin centres weighted by counts.
    pub fn binned_correlation(&self, pair: usize) -> f64 {
        let ((a, b), counts) = &self.hist2d[pair];
        let centre = |ax: &Axis, i: usize| {
            ax.lo + (i as f64 + 0.5) * (ax.hi - ax.lo) / self.bins as f64
        };
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let (x, y, w) = (centre(&self.axes[*a], i), centre(&self.axes[*b], j), c as f64);
                n += w;
                sx += w * x;
                sy += w * y;
                sxx += w * x * x;
                syy += w * y * y;
                sxy += w * x * y;
            }
        }
        let cxy = sxy / n - (sx / n) * (sy / n);
        let cxx = sxx / n - (sx / n).powi(2);
        let cyy = syy / n - (sy / n).powi(2);
        cxy / (cxx * cyy).sqrt()
    }
}

/// 1D and pairwise 2D histograms of a parameter subset, in units of each
/// parameter's prior mean.
pub fn triangle_data(
    samples: &Samples,
    burn_in: usize,
    subset: &[usize],
    bins: usize,
    prior_means: &[f64],
) -> Result<HistogramGrid, DiagnosticsError> {
    if bins < 2 {
        return Err(DiagnosticsError::TooFewBins);
    }
    samples.window(burn_in)?;
    if let Some(&bad) = subset.iter().find(|&&i| i >= samples.params) {
        return Err(DiagnosticsError::BadIndex(bad));
    }
    let mut axes = Vec::new();
    let mut values = Vec::new();
    for &i in subset {
        let scale = match prior_means.get(i) {
            Some(&m) if m != 0.0 => m,
            _ => 1.0,
        };
        let v: Vec<f64> = samples
            .column(burn_in, i)
            .into_iter()
            .map(|x| x / scale)
            .collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        axes.push(Axis {
            param: i,
            scale,
            lo,
            hi,
        });
        values.push(v);
    }
    let idx: Vec<Vec<usize>> = values
        .iter()
        .zip(&axes)
        .map(|(v, ax)| v.iter().map(|&x| bin_index(x, ax.lo, ax.hi, bins)).collect())
        .collect();
    let hist1d = idx
        .iter()
        .map(|col| {
            let mut h = vec![0u64; bins];
            for &b in col {
                h[b] += 1;
            }
            h
        })
        .collect();
    let mut hist2d = Vec::new();
    for a in 0..subset.len() {
        for b in 0..a {
            let mut h = vec![vec![0u64; bins]; bins];
            for (&x, &y) in idx[a].iter().zip(&idx[b]) {
                h[x][y] += 1;
            }
            hist2d.push(((a, b), h));
        }
    }
    Ok(HistogramGrid {
        bins,
        n_samples: values.first().map_or(0, Vec::len),
        axes,
        hist1d,
        hist2d,
    })
}

pub fn autocorr_csv(result: &AutocorrResult, names: &[String]) -> String {
    let mut s = String::from("lag");
    for n in names {
        let _ = write!(s, ",{n}");
    }
    s.push('\n');
    for lag in 0..=result.s_max {
        let _ = write!(s, "{lag}");
        for p in &result.params {
            match &p.rho {
                Some(r) => {
                    let _ = write!(s, ",{:e}", r[lag]);
                }
                None => s.push_str(",nan"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn summary_csv(summary: &Summary, names: &[String], iat: Option<&[Option<f64>]>) -> String {
    let mut s = String::from("param,mean,std,q05,q25,q50,q75,q95,mode");
    if iat.is_some() {
        s.push_str(",iat");
    }
    s.push('\n');
    for (i, (p, n)) in summary.params.iter().zip(names).enumerate() {
        let _ = write!(s, "{n},{:e},{:e}", p.mean, p.std);
        for q in p.quantiles {
            let _ = write!(s, ",{q:e}");
        }
        let _ = write!(s, ",{:e}", p.mode);
        if let Some(t) = iat {
            match t[i] {
                Some(v) => {
                    let _ = write!(s, ",{v:e}");
                }
                None => s.push_str(",nan"),
            }
        }
        s.push('\n');
    }
    s
}

pub fn matrix_csv(m: &[Vec<f64>], names: &[String]) -> String {
    let mut s = String::from("param");
    for n in names {
        let _ = write!(s, ",{n}");
    }
    s.push('\n');
    for (row, n) in m.iter().zip(names) {
        s.push_str(n);
        for v in row {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

pub fn hist1d_csv(grid: &HistogramGrid, axis: usize) -> String {
    let ax = &grid.axes[axis];
    let e = ax.edges(grid.bins);
    let mut s = String::from("lo,hi,count\n");
    for (b, c) in grid.hist1d[axis].iter().enumerate() {
        let _ = writeln!(s, "{:e},{:e},{c}", e[b], e[b + 1]);
    }
    s
}

pub fn hist2d_csv(grid: &HistogramGrid, pair: usize) -> String {
    let ((a, b), counts) = &grid.hist2d[pair];
    let ex = grid.axes[*a].edges(grid.bins);
    let ey = grid.axes[*b].edges(grid.bins);
    let mut s = String::from("x_lo,x_hi,y_lo,y_hi,count\n");
    for (i, row) in counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e},{c}", ex[i], ex[i + 1], ey[j], ey[j + 1]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white_noise(records: usize, walkers: usize, params: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..records * walkers * params)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }

    #[test]
    fn lag_zero_is_exactly_one() {
        let d = white_noise(200, 4, 3, 1);
        let s = Samples::new(200, 4, 3, &d);
        let r = autocovariance(&s, 100, 20).unwrap();
        for p in &r.params {
            assert_eq!(p.rho.as_ref().unwrap()[0], 1.0);
        }
    }

    #[test]
    fn constant_series_is_degenerate() {
        let d = vec![2.5; 100 * 2];
        let s = Samples::new(100, 2, 1, &d);
        let r = autocovariance(&s, 50, 10).unwrap();
        assert_eq!(r.params[0].c0, 0.0);
        assert!(r.params[0].rho.is_none());
        assert!(autocorr_csv(&r, &["x".into()]).contains("nan"));
    }

    #[test]
    fn lag_window_is_checked() {
        let d = white_noise(10, 2, 1, 2);
        let s = Samples::new(10, 2, 1, &d);
        assert!(autocovariance(&s, 5, 5).is_err());
        assert!(summarize(&s, 10).is_err());
    }

    #[test]
    fn shift_and_scale_behaviour() {
        let d = white_noise(300, 3, 1, 4);
        let shifted: Vec<f64> = d.iter().map(|x| x + 1000.0).collect();
        let scaled: Vec<f64> = d.iter().map(|x| 3.0 * x).collect();
        let base = autocovariance(&Samples::new(300, 3, 1, &d), 100, 30).unwrap();
        let sh = autocovariance(&Samples::new(300, 3, 1, &shifted), 100, 30).unwrap();
        let sc = autocovariance(&Samples::new(300, 3, 1, &scaled), 100, 30).unwrap();
        let (r0, r1, r2) = (
            base.params[0].rho.as_ref().unwrap(),
            sh.params[0].rho.as_ref().unwrap(),
            sc.params[0].rho.as_ref().unwrap(),
        );
        for s in 0..=30 {
            assert!((r0[s] - r1[s]).abs() < 1e-9);
            assert!((r0[s] - r2[s]).abs() < 1e-12);
        }
        assert!((sc.params[0].c0 / base.params[0].c0 - 9.0).abs() < 1e-12);
    }

    #[test]
    fn integrated_time_of_white_noise_is_near_one() {
        let mut rho = vec![1.0];
        rho.extend(std::iter::repeat(0.0).take(20));
        assert_eq!(integrated_time(&rho, 5.0), Some(1.0));
        assert_eq!(integrated_time(&[1.0, 0.99, 0.98], 5.0), None);
    }

    #[test]
    fn identical_samples_summary() {
        let d = vec![4.0; 20 * 2 * 2];
        let s = summarize(&Samples::new(20, 2, 2, &d), 0).unwrap();
        assert_eq!(s.params[0].mean, 4.0);
        assert_eq!(s.params[0].std, 0.0);
        assert_eq!(s.params[0].quantiles, [4.0; 5]);
        assert_eq!(s.params[0].mode, 4.0);
        assert_eq!(s.correlation, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 0.25), 1.0);
        assert!((quantile_sorted(&v, 0.05) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn single_sample_fills_one_bin() {
        let d = [3.0, 7.0];
        let g = triangle_data(&Samples::new(1, 1, 2, &d), 0, &[0, 1], 4, &[1.5, 7.0]).unwrap();
        for h in &g.hist1d {
            assert_eq!(h.iter().filter(|&&c| c > 0).count(), 1);
        }
        let nz: usize = g.hist2d[0].1.iter().flatten().filter(|&&c| c > 0).count();
        assert_eq!(nz, 1);
        assert!((g.axes[0].lo - 1.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_rejects_bad_input() {
        let d = [1.0, 2.0];
        let s = Samples::new(2, 1, 1, &d);
        assert_eq!(
            triangle_data(&s, 0, &[0], 1, &[1.0]).unwrap_err(),
            DiagnosticsError::TooFewBins
        );
        assert_eq!(
            triangle_data(&s, 0, &[3], 4, &[1.0]).unwrap_err(),
            DiagnosticsError::BadIndex(3)
        );
    }

    #[test]
    fn correlated_pair_sits_on_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut d = Vec::new();
        for _ in 0..500 {
            let x: f64 = StandardNormal.sample(&mut rng);
            d.extend([x, x]);
        }
        let g = triangle_data(&Samples::new(500, 1, 2, &d), 0, &[0, 1], 10, &[1.0, 1.0]).unwrap();
        let h = &g.hist2d[0].1;
        for (i, row) in h.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(c, 0);
                }
            }
        }
    }
}
