//! Affine-invariant stretch-move ensemble sampler.
//!
//! The ensemble is split into two halves. Each half is updated in turn
//! using partners drawn from the other, frozen half, so the proposals of a
//! half are independent and are evaluated in parallel. Every random draw of
//! walker `k` in sweep `t` comes from its own stream keyed on
//! `(seed, k, t)`, which makes results independent of thread scheduling.
//!
//! Chains are stored in a little-endian binary file:
//!
//! ```text
//! "KCHN" | version u32 | L u32 | n u32 | stored u64 | json_len u64 | json
//! positions  f64[stored][L][n]
//! log_post   f64[stored][L]
//! accepted   u64[L]
//! ```
//!
//! Record 0 is the initial ensemble; record `r` holds the state after sweep
//! `r * thin_store`.

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calibration::PriorSpec;

const MAGIC: &[u8; 4] = b"KCHN";
const FORMAT_VERSION: u32 = 1;
const INIT_STREAM: u64 = u64::MAX - 1;
const MAX_INIT_REDRAWS: usize = 100;

/// An unnormalised log-density over `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a run seed with two counters into an independent stream seed.
pub fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b.rotate_left(17))
}

pub fn walker_rng(seed: u64, walker: u64, sweep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, walker, sweep))
}

/// Maps a uniform `u` in [0, 1] to the stretch factor; density ∝ 1/√z on [1/a, a].
pub fn stretch_from_uniform(u: f64, a: f64) -> f64 {
    let s = 1.0 + (a - 1.0) * u;
    s * s / a
}

pub fn draw_stretch<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    stretch_from_uniform(rng.gen::<f64>(), a)
}

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("walker {walker}: log-posterior stayed -inf after {redraws} redraws (last draw {theta:?})")]
    Init {
        walker: usize,
        redraws: usize,
        theta: Vec<f64>,
    },
    #[error("chain file: {0}")]
    Format(String),
    #[error("checkpoint does not match this run: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub a: f64,
    pub walkers: usize,
    pub sweeps: u64,
    pub seed: u64,
    pub thin_store: u64,
    pub checkpoint_every: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            a: 1.3,
            walkers: 64,
            sweeps: 15_000,
            seed: 0,
            thin_store: 1,
            checkpoint_every: 500,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, dim: usize) -> Result<(), SamplerError> {
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(SamplerError::Config(format!("a = {} must exceed 1", self.a)));
        }
        if self.walkers < 4 || self.walkers % 2 != 0 {
            return Err(SamplerError::Config(format!(
                "walker count {} must be even and at least 4",
                self.walkers
            )));
        }
        if self.thin_store == 0 || self.sweeps % self.thin_store != 0 {
            return Err(SamplerError::Config(format!(
                "sweeps ({}) must be a multiple of thin_store ({})",
                self.sweeps, self.thin_store
            )));
        }
        if self.walkers < 2 * dim {
            log::warn!(
                "{} walkers for {dim} parameters; at least {} are recommended",
                self.walkers,
                2 * dim
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub walkers: Vec<Vec<f64>>,
    pub log_posteriors: Vec<f64>,
    pub sweep: u64,
}

impl EnsembleState {
    /// Wraps given positions, evaluating each walker's log-density.
    pub fn from_walkers<D: LogDensity>(target: &D, walkers: Vec<Vec<f64>>) -> Self {
        let log_posteriors = walkers.par_iter().map(|w| target.log_density(w)).collect();
        Self {
            walkers,
            log_posteriors,
            sweep: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }
}

/// Normal(mean, sd²) restricted to [lo, hi]. Plain rejection is tried
/// first; intervals far in a tail fall back to inversion of the CDF.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..64 {
        let n: f64 = StandardNormal.sample(rng);
        let x = mean + sd * n;
        if x >= lo && x <= hi {
            return x;
        }
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut a, mut b) = ((lo - mean) / sd, (hi - mean) / sd);
    // Work in the lower tail, where the CDF keeps its relative precision.
    let flip = a > 0.0;
    if flip {
        (a, b) = (-b, -a);
    }
    let (pa, pb) = (std.cdf(a), std.cdf(b));
    let u: f64 = rng.gen();
    let mut z = std.inverse_cdf(pa + u * (pb - pa)).clamp(a, b);
    if flip {
        z = -z;
    }
    (mean + sd * z).clamp(lo, hi)
}

/// Draws each walker from the prior with its spread reduced tenfold,
/// redrawing walkers whose log-posterior is −∞.
pub fn init_ensemble<D: LogDensity>(
    prior: &PriorSpec,
    walkers: usize,
    seed: u64,
    target: &D,
) -> Result<EnsembleState, SamplerError> {
    if walkers < 4 {
        return Err(SamplerError::Config("at least 4 walkers are required".into()));
    }
    let results: Vec<Result<(Vec<f64>, f64), SamplerError>> = (0..walkers)
        .into_par_iter()
        .map(|k| {
            let mut rng = walker_rng(seed, k as u64, INIT_STREAM);
            let mut theta = Vec::new();
            for _ in 0..=MAX_INIT_REDRAWS {
                theta = prior
                    .entries
                    .iter()
                    .map(|e| truncated_normal(&mut rng, e.mean, e.sigma / 10.0, e.lower, e.upper))
                    .collect();
                let lp = target.log_density(&theta);
                if lp > f64::NEG_INFINITY {
                    return Ok((theta, lp));
                }
            }
            Err(SamplerError::Init {
                walker: k,
                redraws: MAX_INIT_REDRAWS,
                theta,
            })
        })
        .collect();
    let mut state = EnsembleState {
        walkers: Vec::with_capacity(walkers),
        log_posteriors: Vec::with_capacity(walkers),
        sweep: 0,
    };
    for r in results {
        let (w, lp) = r?;
        state.walkers.push(w);
        state.log_posteriors.push(lp);
    }
    Ok(state)
}

struct Move {
    position: Vec<f64>,
    log_post: f64,
    accepted: bool,
}

fn propose<D: LogDensity>(
    target: &D,
    a: f64,
    seed: u64,
    sweep: u64,
    k: usize,
    state: &EnsembleState,
    partners: std::ops::Range<usize>,
) -> Move {
    let mut rng = walker_rng(seed, k as u64, sweep);
    let j = partners.start + rng.gen_range(0..partners.len());
    let z = draw_stretch(&mut rng, a);
    let u_accept = 1.0 - rng.gen::<f64>();
    let xk = &state.walkers[k];
    let xj = &state.walkers[j];
    let y: Vec<f64> = xk
        .iter()
        .zip(xj)
        .map(|(&xk, &xj)| xk + (z - 1.0) * (xk - xj))
        .collect();
    let lp_new = target.log_density(&y);
    let n = xk.len() as f64;
    let log_q = (n - 1.0) * z.ln() + lp_new - state.log_posteriors[k];
    if log_q > u_accept.ln() {
        Move {
            position: y,
            log_post: lp_new,
            accepted: true,
        }
    } else {
        Move {
            position: Vec::new(),
            log_post: state.log_posteriors[k],
            accepted: false,
        }
    }
}

/// One red-black sweep. Returns which walkers moved.
pub fn sweep<D: LogDensity>(state: &mut EnsembleState, target: &D, a: f64, seed: u64) -> Vec<bool> {
    let l = state.len();
    let half = l / 2;
    let mut accepted = vec![false; l];
    for (active, other) in [(0..half, half..l), (half..l, 0..half)] {
        let moves: Vec<Move> = active
            .clone()
            .into_par_iter()
            .map(|k| propose(target, a, seed, state.sweep, k, state, other.clone()))
            .collect();
        for (k, m) in active.zip(moves) {
            if m.accepted {
                state.walkers[k] = m.position;
                state.log_posteriors[k] = m.log_post;
                accepted[k] = true;
            }
        }
    }
    state.sweep += 1;
    accepted
}

/// Run metadata stored as JSON in the chain header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub sampler: SamplerConfig,
    /// Digest of whatever defines the target density (problem, mechanism).
    pub problem_hash: String,
    pub param_names: Vec<String>,
    /// Axis normalisation for histogram output.
    pub prior_means: Vec<f64>,
    pub crate_version: String,
}

impl ChainConfig {
    /// Identity of the run excluding the sweep count, so a checkpoint may be
    /// extended with more sweeps.
    pub fn compat_hash(&self) -> String {
        let mut c = self.clone();
        c.sampler.sweeps = 0;
        c.sampler.checkpoint_every = 0;
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex_digest(&json)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub config: ChainConfig,
    pub n_walkers: usize,
    pub dim: usize,
    /// `[record][walker][param]`, flattened.
    pub positions: Vec<f64>,
    /// `[record][walker]`, flattened.
    pub log_posteriors: Vec<f64>,
    pub accepted: Vec<u64>,
}

impl Chain {
    pub fn new(config: ChainConfig, initial: &EnsembleState) -> Self {
        let mut c = Chain {
            n_walkers: initial.len(),
            dim: initial.walkers.first().map_or(0, Vec::len),
            config,
            positions: Vec::new(),
            log_posteriors: Vec::new(),
            accepted: vec![0; initial.len()],
        };
        c.push(initial);
        c
    }

    fn push(&mut self, state: &EnsembleState) {
        for w in &state.walkers {
            self.positions.extend_from_slice(w);
        }
        self.log_posteriors.extend_from_slice(&state.log_posteriors);
    }

    pub fn stored(&self) -> usize {
        if self.n_walkers == 0 {
            0
        } else {
            self.log_posteriors.len() / self.n_walkers
        }
    }

    /// Sweep index of stored record `r`.
    pub fn sweep_of(&self, r: usize) -> u64 {
        r as u64 * self.config.sampler.thin_store
    }

    /// Sweeps completed by the last stored record.
    pub fn last_sweep(&self) -> u64 {
        self.sweep_of(self.stored().saturating_sub(1))
    }

    pub fn position(&self, record: usize, walker: usize) -> &[f64] {
        let off = (record * self.n_walkers + walker) * self.dim;
        &self.positions[off..off + self.dim]
    }

    pub fn value(&self, record: usize, walker: usize, param: usize) -> f64 {
        self.positions[(record * self.n_walkers + walker) * self.dim + param]
    }

    pub fn log_posterior(&self, record: usize, walker: usize) -> f64 {
        self.log_posteriors[record * self.n_walkers + walker]
    }

    /// The ensemble held in the last record.
    pub fn last_state(&self) -> EnsembleState {
        let r = self.stored() - 1;
        EnsembleState {
            walkers: (0..self.n_walkers)
                .map(|k| self.position(r, k).to_vec())
                .collect(),
            log_posteriors: (0..self.n_walkers)
                .map(|k| self.log_posterior(r, k))
                .collect(),
            sweep: self.last_sweep(),
        }
    }

    pub fn acceptance_fraction(&self) -> Vec<f64> {
        let s = self.last_sweep().max(1) as f64;
        self.accepted.iter().map(|&a| a as f64 / s).collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), SamplerError> {
        let mut w = BufWriter::new(w);
        let json = serde_json::to_vec(&self.config).map_err(|e| SamplerError::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_walkers as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.stored() as u64).to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for x in &self.positions {
            w.write_all(&x.to_le_bytes())?;
        }
        for x in &self.log_posteriors {
            w.write_all(&x.to_le_bytes())?;
        }
        for x in &self.accepted {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, SamplerError> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SamplerError::Format("not a chain file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(SamplerError::Format(format!("unsupported version {version}")));
        }
        let n_walkers = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let stored = read_u64(&mut r)? as usize;
        let json_len = read_u64(&mut r)? as usize;
        if json_len > 1 << 30 {
            return Err(SamplerError::Format("config block too large".into()));
        }
        let mut json = vec![0u8; json_len];
        r.read_exact(&mut json)?;
        let config: ChainConfig =
            serde_json::from_slice(&json).map_err(|e| SamplerError::Format(e.to_string()))?;
        if config.param_names.len() != dim || config.sampler.walkers != n_walkers {
            return Err(SamplerError::Format(
                "header dimensions disagree with the stored config".into(),
            ));
        }
        let positions = read_f64s(&mut r, stored * n_walkers * dim)?;
        let log_posteriors = read_f64s(&mut r, stored * n_walkers)?;
        let mut accepted = Vec::with_capacity(n_walkers);
        for _ in 0..n_walkers {
            accepted.push(read_u64(&mut r)?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(SamplerError::Format("trailing bytes after chain data".into()));
        }
        Ok(Chain {
            config,
            n_walkers,
            dim,
            positions,
            log_posteriors,
            accepted,
        })
    }

    /// Writes to `<path>.partial` and renames, so readers never see a torn file.
    pub fn save(&self, path: &Path) -> Result<(), SamplerError> {
        let tmp = partial_path(path);
        self.write_to(fs::File::create(&tmp)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SamplerError> {
        Self::read_from(fs::File::open(path)?)
    }

    /// `sweep,walker,log_posterior,<param...>` with one row per stored sample.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        write!(w, "sweep,walker,log_posterior")?;
        for n in &self.config.param_names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for r in 0..self.stored() {
            for k in 0..self.n_walkers {
                write!(w, "{},{},{:e}", self.sweep_of(r), k, self.log_posterior(r, k))?;
                for x in self.position(r, k) {
                    write!(w, ",{x:e}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()
    }
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

/// Advances `chain` until `total_sweeps` sweeps are done, checkpointing to
/// `checkpoint` every `checkpoint_every` sweeps.
pub fn extend<D: LogDensity>(
    target: &D,
    chain: &mut Chain,
    total_sweeps: u64,
    checkpoint: Option<&Path>,
) -> Result<(), SamplerError> {
    let cfg = chain.config.sampler.clone();
    let mut state = chain.last_state();
    while state.sweep < total_sweeps {
        let moved = sweep(&mut state, target, cfg.a, cfg.seed);
        for (c, m) in chain.accepted.iter_mut().zip(moved) {
            *c += u64::from(m);
        }
        if state.sweep % cfg.thin_store == 0 {
            chain.push(&state);
        }
        if state.sweep % 100 == 0 {
            log::info!("sweep {}/{}", state.sweep, total_sweeps);
        }
        if let Some(path) = checkpoint {
            if cfg.checkpoint_every > 0
                && state.sweep % cfg.checkpoint_every == 0
                && state.sweep % cfg.thin_store == 0
            {
                chain.save(path)?;
            }
        }
    }
    chain.config.sampler.sweeps = chain.config.sampler.sweeps.max(total_sweeps);
    Ok(())
}

/// Initial ensemble plus `config.sampler.sweeps` sweeps.
pub fn run<D: LogDensity>(
    target: &D,
    initial: EnsembleState,
    config: ChainConfig,
    checkpoint: Option<&Path>,
) -> Result<Chain, SamplerError> {
    config.sampler.validate(target.dim())?;
    if initial.len() != config.sampler.walkers || config.param_names.len() != target.dim() {
        return Err(SamplerError::Config(
            "initial ensemble does not match the configuration".into(),
        ));
    }
    let total = config.sampler.sweeps;
    let mut chain = Chain::new(config, &initial);
    extend(target, &mut chain, total, checkpoint)?;
    Ok(chain)
}

/// Continues a checkpointed chain to `config.sampler.sweeps`. The config must
/// match the checkpoint apart from the sweep count.
pub fn resume<D: LogDensity>(
    target: &D,
    mut chain: Chain,
    config: &ChainConfig,
    checkpoint: Option<&Path>,
) -> Result<Chain, SamplerError> {
    config.sampler.validate(target.dim())?;
    if chain.config.compat_hash() != config.compat_hash() {
        return Err(SamplerError::Mismatch(
            "configuration hash differs from the checkpoint's".into(),
        ));
    }
    if chain.last_sweep() > config.sampler.sweeps {
        return Err(SamplerError::Mismatch(format!(
            "checkpoint already holds {} sweeps",
            chain.last_sweep()
        )));
    }
    chain.config.sampler.checkpoint_every = config.sampler.checkpoint_every;
    extend(target, &mut chain, config.sampler.sweeps, checkpoint)?;
    Ok(chain)
}
