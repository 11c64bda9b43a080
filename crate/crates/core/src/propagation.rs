//! Pushing thinned posterior samples through a prediction case.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use crate::calibration::{apply_parameters, ActiveParameterMap, CalibrationError};
use crate::diagnostics::{quantile_sorted, QUANTILE_LEVELS};
use crate::mechanism::Mechanism;
use crate::reactor::{simulate_case, IntegratorConfig, ReactorCase};
use crate::sampler::Chain;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagationError {
    #[error("sweep {sweep} is beyond the chain's last sweep {last}")]
    Overrun { sweep: u64, last: u64 },
    #[error("sweep {sweep} was not stored (thin_store = {thin})")]
    NotStored { sweep: u64, thin: u64 },
    #[error("invalid thinning: {0}")]
    Invalid(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// `picks` sweeps `start, start + stride, ...`, every walker at each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThinningSpec {
    pub picks: usize,
    pub start: u64,
    pub stride: u64,
}

impl ThinningSpec {
    /// Uniform picks over the second half of a chain of `total_sweeps`:
    /// start `T/2`, stride `floor((T - T/2) / picks)`.
    pub fn second_half(total_sweeps: u64, picks: usize) -> Result<Self, PropagationError> {
        if picks == 0 {
            return Err(PropagationError::Invalid("picks must be at least 1".into()));
        }
        let start = total_sweeps / 2;
        let stride = (total_sweeps - start) / picks as u64;
        if picks > 1 && stride == 0 {
            return Err(PropagationError::Invalid(format!(
                "{picks} picks do not fit in {} sweeps",
                total_sweeps - start
            )));
        }
        Ok(Self {
            picks,
            start,
            stride,
        })
    }

    pub fn sweeps(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.picks as u64).map(move |n| self.start + n * self.stride)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThinnedSample {
    pub walker: usize,
    pub sweep: u64,
    pub theta: Vec<f64>,
}

/// Deterministic selection, sweep-major then walker order.
pub fn thin(chain: &Chain, spec: &ThinningSpec) -> Result<Vec<ThinnedSample>, PropagationError> {
    if spec.picks == 0 {
        return Err(PropagationError::Invalid("picks must be at least 1".into()));
    }
    if spec.picks > 1 && spec.stride == 0 {
        return Err(PropagationError::Invalid("stride must be positive".into()));
    }
    let thin = chain.config.sampler.thin_store;
    let last = chain.last_sweep();
    let mut out = Vec::with_capacity(spec.picks * chain.n_walkers);
    for sweep in spec.sweeps() {
        if sweep > last {
            return Err(PropagationError::Overrun { sweep, last });
        }
        if sweep % thin != 0 {
            return Err(PropagationError::NotStored { sweep, thin });
        }
        let record = (sweep / thin) as usize;
        for walker in 0..chain.n_walkers {
            out.push(ThinnedSample {
                walker,
                sweep,
                theta: chain.position(record, walker).to_vec(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub walker: usize,
    pub sweep: u64,
    pub theta: Vec<f64>,
    /// Predicted observable, or the failure message.
    pub value: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub outcomes: Vec<SampleOutcome>,
    /// Over successful samples only; `None` if every sample failed.
    pub summary: Option<PredictionSummary>,
    pub failures: usize,
    pub hist_edges: Vec<f64>,
    pub hist_counts: Vec<u64>,
}

const HIST_BINS: usize = 20;

/// Statistics over values sorted first, so any permutation of the input
/// gives bit-identical results.
pub fn summarize_values(values: &[f64]) -> Option<PredictionSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut quantiles = [0.0; 5];
    for (q, level) in quantiles.iter_mut().zip(QUANTILE_LEVELS) {
        *q = quantile_sorted(&v, level);
    }
    Some(PredictionSummary {
        n,
        mean,
        std: var.sqrt(),
        quantiles,
    })
}

fn histogram(values: &[f64]) -> (Vec<f64>, Vec<u64>) {
    if values.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo < hi {
        (lo, hi)
    } else {
        let pad = 0.5 * lo.abs().max(f64::MIN_POSITIVE);
        (lo - pad, hi + pad)
    };
    let edges = (0..=HIST_BINS)
        .map(|b| lo + (hi - lo) * b as f64 / HIST_BINS as f64)
        .collect();
    let mut counts = vec![0u64; HIST_BINS];
    for &x in values {
        let b = (((x - lo) / (hi - lo) * HIST_BINS as f64).floor() as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    (edges, counts)
}

/// Simulates `case` once per sample. Failures are recorded per sample and
/// never abort the batch.
pub fn propagate(
    samples: &[ThinnedSample],
    case: &ReactorCase,
    mech: &Mechanism,
    map: &ActiveParameterMap,
    cfg: &IntegratorConfig,
) -> Result<PropagationResult, PropagationError> {
    if let Some(bad) = samples.iter().find(|s| s.theta.len() != map.dim()) {
        return Err(CalibrationError::LengthMismatch {
            expected: map.dim(),
            got: bad.theta.len(),
        }
        .into());
    }
    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .map(|s| {
            let value = apply_parameters(mech, map, &s.theta)
                .map_err(|e| e.to_string())
                .and_then(|m| simulate_case(&m, case, cfg).map_err(|e| e.to_string()));
            SampleOutcome {
                walker: s.walker,
                sweep: s.sweep,
                theta: s.theta.clone(),
                value,
            }
        })
        .collect();
    let mut ok: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.value.as_ref().ok().copied())
        .collect();
    ok.sort_by(f64::total_cmp);
    let failures = outcomes.len() - ok.len();
    let (hist_edges, hist_counts) = histogram(&ok);
    Ok(PropagationResult {
        summary: summarize_values(&ok),
        outcomes,
        failures,
        hist_edges,
        hist_counts,
    })
}

pub fn samples_csv(result: &PropagationResult, names: &[String]) -> String {
    let mut s = String::from("walker,sweep");
    for n in names {
        let _ = write!(s, ",{n}");
    }
    s.push_str(",observable,status\n");
    for o in &result.outcomes {
        let _ = write!(s, "{},{}", o.walker, o.sweep);
        for x in &o.theta {
            let _ = write!(s, ",{x:e}");
        }
        match &o.value {
            Ok(v) => {
                let _ = writeln!(s, ",{v:e},ok");
            }
            Err(e) => {
                let _ = writeln!(s, ",nan,\"failed: {}\"", e.replace('"', "'"));
            }
        }
    }
    s
}

pub fn summary_csv(result: &PropagationResult) -> String {
    let mut s = String::from("n_success,n_failed,mean,std,q05,q25,q50,q75,q95\n");
    match &result.summary {
        Some(p) => {
            let _ = write!(s, "{},{},{:e},{:e}", p.n, result.failures, p.mean, p.std);
            for q in p.quantiles {
                let _ = write!(s, ",{q:e}");
            }
            s.push('\n');
        }
        None => {
            let _ = writeln!(s, "0,{},nan,nan,nan,nan,nan,nan,nan", result.failures);
        }
    }
    s
}

pub fn hist_csv(result: &PropagationResult) -> String {
    let mut s = String::from("lo,hi,count\n");
    for (b, c) in result.hist_counts.iter().enumerate() {
        let _ = writeln!(s, "{:e},{:e},{c}", result.hist_edges[b], result.hist_edges[b + 1]);
    }
    s
}

/// Writes one mechanism file per sample plus an `index.csv` naming them.
pub fn export_calibrations(
    dir: &Path,
    mech: &Mechanism,
    map: &ActiveParameterMap,
    samples: &[ThinnedSample],
) -> Result<Vec<String>, io::Error> {
    fs::create_dir_all(dir)?;
    let mut index = String::from("file,walker,sweep\n");
    let mut names = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let m = apply_parameters(mech, map, &s.theta)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let name = format!("calibration_{i:04}.mech");
        fs::write(dir.join(&name), m.to_string())?;
        let _ = writeln!(index, "{name},{},{}", s.walker, s.sweep);
        names.push(name);
    }
    fs::write(dir.join("index.csv"), index)?;
    Ok(names)
}
