//! Active parameters, truncated-Gaussian prior, Gaussian likelihood over
//! reactor targets, and the resulting log-posterior.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{
    parse_problem, ActiveEntry, ConfigError, ProblemConfig, SlotField, SlotRef, TargetEntry,
};
use crate::mechanism::{Mechanism, RateModel};
use crate::reactor::{simulate_case, IntegratorConfig, ReactorCase, SimulationError};
use crate::sampler::{stream_seed, LogDensity};

const BASELINE_ACTIVE: &str = include_str!("../data/h2_active31.cfg");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("active parameter '{slot}': {reason}")]
    InvalidSlot { slot: String, reason: String },
    #[error("slot '{0}' appears more than once in the active map")]
    DuplicateSlot(String),
    #[error("tie group '{group}': {reason}")]
    InconsistentTie { group: String, reason: String },
    #[error("prior for '{name}': {reason}")]
    Prior { name: String, reason: String },
    #[error("expected {expected} parameters, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("target '{label}': {reason}")]
    Target { label: String, reason: String },
    #[error("problem has no targets")]
    NoTargets,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    PreExponential(usize),
    LowPressureA,
    Efficiency(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    reaction: usize,
    field: Field,
}

/// One component of θ and every mechanism slot it drives.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveParameter {
    pub name: String,
    pub tie: Option<String>,
    pub slot_names: Vec<String>,
    slots: Vec<Slot>,
}

/// Binding of a flat θ vector to mechanism slots. Components are ordered by
/// first appearance in the active file; tied lines share one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveParameterMap {
    pub params: Vec<ActiveParameter>,
}

fn resolve_slot(mech: &Mechanism, slot: &SlotRef) -> Result<Slot, CalibrationError> {
    let invalid = |reason: &str| CalibrationError::InvalidSlot {
        slot: slot.to_string(),
        reason: reason.to_string(),
    };
    let ri = mech
        .reaction_index(&slot.reaction)
        .ok_or_else(|| invalid("unknown reaction"))?;
    let r = &mech.reactions[ri];
    let field = match &slot.field {
        SlotField::PreExponential(k) => {
            if *k > r.duplicates.len() {
                return Err(invalid("no such duplicate line"));
            }
            Field::PreExponential(*k)
        }
        SlotField::LowPressureA => match r.rate {
            RateModel::Falloff { .. } => Field::LowPressureA,
            _ => return Err(invalid("reaction has no low-pressure limit")),
        },
        SlotField::Efficiency(sp) => {
            if r.rate.efficiencies().is_none() {
                return Err(invalid("reaction has no third-body efficiencies"));
            }
            Field::Efficiency(
                mech.species_index(sp)
                    .ok_or_else(|| invalid("unknown species"))?,
            )
        }
    };
    Ok(Slot { reaction: ri, field })
}

fn read_slot(mech: &Mechanism, s: &Slot) -> f64 {
    let r = &mech.reactions[s.reaction];
    match s.field {
        Field::PreExponential(0) => r.rate.primary().a,
        Field::PreExponential(k) => r.duplicates[k - 1].a,
        Field::LowPressureA => match &r.rate {
            RateModel::Falloff { low, .. } => low.a,
            _ => unreachable!("slot resolved against a falloff reaction"),
        },
        Field::Efficiency(sp) => r.rate.efficiencies().map_or(1.0, |e| e.get(sp)),
    }
}

fn write_slot(mech: &mut Mechanism, s: &Slot, value: f64) {
    let r = &mut mech.reactions[s.reaction];
    match s.field {
        Field::PreExponential(0) => r.rate.primary_mut().a = value,
        Field::PreExponential(k) => r.duplicates[k - 1].a = value,
        Field::LowPressureA => {
            if let RateModel::Falloff { low, .. } = &mut r.rate {
                low.a = value;
            }
        }
        Field::Efficiency(sp) => {
            if let Some(e) = r.rate.efficiencies_mut() {
                e.set(sp, value);
            }
        }
    }
}

impl ActiveParameterMap {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    /// Current values of each component in `mech` (first slot of a tie group).
    pub fn read(&self, mech: &Mechanism) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| read_slot(mech, &p.slots[0]))
            .collect()
    }

    pub fn apply_into(&self, mech: &mut Mechanism, theta: &[f64]) -> Result<(), CalibrationError> {
        if theta.len() != self.dim() {
            return Err(CalibrationError::LengthMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        for (p, &v) in self.params.iter().zip(theta) {
            for s in &p.slots {
                write_slot(mech, s, v);
            }
        }
        Ok(())
    }
}

/// A copy of `mech` with every active slot overwritten from `theta`.
pub fn apply_parameters(
    mech: &Mechanism,
    map: &ActiveParameterMap,
    theta: &[f64],
) -> Result<Mechanism, CalibrationError> {
    let mut out = mech.clone();
    map.apply_into(&mut out, theta)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorEntry {
    pub mean: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Independent Gaussians truncated to hard bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub entries: Vec<PriorEntry>,
}

impl PriorSpec {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn means(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mean).collect()
    }

    pub fn in_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .entries
                .iter()
                .zip(theta)
                .all(|(e, &x)| x >= e.lower && x <= e.upper)
    }

    /// Components whose mean lies outside its own bounds. Such a prior is
    /// still well defined (the density is the tail of the Gaussian), so this
    /// is reported rather than rejected.
    pub fn means_outside_bounds(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.mean < e.lower || e.mean > e.upper)
            .map(|(i, _)| i)
            .collect()
    }

    fn validate(&self, names: &[String]) -> Result<(), CalibrationError> {
        for (e, name) in self.entries.iter().zip(names) {
            let bad = |reason: &str| CalibrationError::Prior {
                name: name.clone(),
                reason: reason.to_string(),
            };
            if ![e.mean, e.sigma, e.lower, e.upper].iter().all(|v| v.is_finite()) {
                return Err(bad("values must be finite"));
            }
            if e.sigma <= 0.0 {
                return Err(bad("sigma must be positive"));
            }
            if e.lower >= e.upper {
                return Err(bad("lower bound must be below upper bound"));
            }
        }
        Ok(())
    }
}

/// Log of the truncated Gaussian prior, up to its normalisation constant.
pub fn log_prior(prior: &PriorSpec, theta: &[f64]) -> f64 {
    if !prior.in_bounds(theta) {
        return f64::NEG_INFINITY;
    }
    prior
        .entries
        .iter()
        .zip(theta)
        .map(|(e, &x)| {
            let r = (x - e.mean) / e.sigma;
            -0.5 * r * r
        })
        .sum()
}

/// Builds the map and prior from active-file entries. Missing means come
/// from the mechanism; a missing sigma equals the mean.
pub fn build_active(
    mech: &Mechanism,
    entries: &[ActiveEntry],
) -> Result<(ActiveParameterMap, PriorSpec), CalibrationError> {
    let mut params: Vec<ActiveParameter> = Vec::new();
    let mut priors: Vec<PriorEntry> = Vec::new();
    let mut seen: Vec<Slot> = Vec::new();
    for entry in entries {
        let slot = resolve_slot(mech, &entry.slot)?;
        if seen.contains(&slot) {
            return Err(CalibrationError::DuplicateSlot(entry.slot.to_string()));
        }
        seen.push(slot.clone());
        let existing = entry
            .tie
            .as_ref()
            .and_then(|g| params.iter().position(|p| p.tie.as_ref() == Some(g)));
        if let Some(i) = existing {
            let group = entry.tie.clone().unwrap_or_default();
            let prev = priors[i];
            let given = [
                (entry.mean, prev.mean),
                (entry.sigma, prev.sigma),
                (entry.lower, prev.lower),
                (entry.upper, prev.upper),
            ];
            if given.iter().any(|(g, p)| g.is_some_and(|g| g != *p)) {
                return Err(CalibrationError::InconsistentTie {
                    group,
                    reason: format!("prior of '{}' differs from the group's", entry.slot),
                });
            }
            params[i].slots.push(slot);
            params[i].slot_names.push(entry.slot.to_string());
            continue;
        }
        let name = entry.slot.to_string();
        let mean = entry.mean.unwrap_or_else(|| read_slot(mech, &slot));
        let (Some(lower), Some(upper)) = (entry.lower, entry.upper) else {
            return Err(CalibrationError::Prior {
                name,
                reason: "lower and upper bounds are required".into(),
            });
        };
        priors.push(PriorEntry {
            mean,
            sigma: entry.sigma.unwrap_or(mean),
            lower,
            upper,
        });
        params.push(ActiveParameter {
            name: name.clone(),
            tie: entry.tie.clone(),
            slot_names: vec![name],
            slots: vec![slot],
        });
    }
    let map = ActiveParameterMap { params };
    let prior = PriorSpec { entries: priors };
    prior.validate(&map.names())?;
    for i in prior.means_outside_bounds() {
        log::warn!(
            "prior mean of '{}' lies outside its bounds [{}, {}]",
            map.params[i].name,
            prior.entries[i].lower,
            prior.entries[i].upper
        );
    }
    Ok((map, prior))
}

/// The active-parameter file shipped with the baseline mechanism.
pub fn baseline_active_text() -> &'static str {
    BASELINE_ACTIVE
}

/// The 31-component map and prior of the bundled hydrogen study.
pub fn baseline_active(mech: &Mechanism) -> Result<(ActiveParameterMap, PriorSpec), CalibrationError> {
    let cfg = parse_problem(BASELINE_ACTIVE)?;
    build_active(mech, &cfg.active)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTarget {
    pub label: String,
    pub case: ReactorCase,
    pub d: f64,
    pub sigma: f64,
}

impl ExperimentTarget {
    fn from_entry(mech: &Mechanism, t: &TargetEntry) -> Result<Self, CalibrationError> {
        let bad = |reason: String| CalibrationError::Target {
            label: t.label.clone(),
            reason,
        };
        let d = t.d.ok_or_else(|| bad("missing measured value 'd'".into()))?;
        let sigma = t.sigma.ok_or_else(|| bad("missing 'sigma'".into()))?;
        if !(sigma > 0.0) {
            return Err(bad("sigma must be positive".into()));
        }
        t.case.validate(mech).map_err(|e| bad(e.to_string()))?;
        Ok(Self {
            label: t.label.clone(),
            case: t.case.clone(),
            d,
            sigma,
        })
    }
}

/// Model prediction for one target under an already-parameterised mechanism.
pub fn simulate_target(
    mech: &Mechanism,
    target: &ExperimentTarget,
    cfg: &IntegratorConfig,
) -> Result<f64, SimulationError> {
    simulate_case(mech, &target.case, cfg)
}

/// Everything needed to evaluate `log p(θ | d)` up to a constant.
///
/// Evaluation is safe from many threads at once: each call works on its
/// own mechanism copy, and the counters are atomic.
#[derive(Debug)]
pub struct PosteriorProblem {
    pub mechanism: Mechanism,
    pub map: ActiveParameterMap,
    pub prior: PriorSpec,
    pub targets: Vec<ExperimentTarget>,
    pub integrator: IntegratorConfig,
    simulations: AtomicU64,
    failures: AtomicU64,
    evaluations: AtomicU64,
}

impl PosteriorProblem {
    pub fn new(
        mechanism: Mechanism,
        map: ActiveParameterMap,
        prior: PriorSpec,
        targets: Vec<ExperimentTarget>,
        integrator: IntegratorConfig,
    ) -> Result<Self, CalibrationError> {
        if targets.is_empty() {
            return Err(CalibrationError::NoTargets);
        }
        if map.dim() != prior.dim() {
            return Err(CalibrationError::LengthMismatch {
                expected: map.dim(),
                got: prior.dim(),
            });
        }
        integrator.validate().map_err(|e| CalibrationError::Prior {
            name: "integrator".into(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            mechanism,
            map,
            prior,
            targets,
            integrator,
            simulations: AtomicU64::new(0),
            failures: AtomicU64::new(0),
            evaluations: AtomicU64::new(0),
        })
    }

    /// Assembles a problem from a parsed config and the mechanism it names.
    pub fn from_config(mechanism: Mechanism, cfg: &ProblemConfig) -> Result<Self, CalibrationError> {
        let (map, prior) = build_active(&mechanism, &cfg.active)?;
        let targets = cfg
            .targets
            .iter()
            .map(|t| ExperimentTarget::from_entry(&mechanism, t))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(mechanism, map, prior, targets, cfg.integrator)
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Reactor integrations performed so far.
    pub fn simulations(&self) -> u64 {
        self.simulations.load(Ordering::Relaxed)
    }

    /// Likelihood evaluations that hit a simulation failure.
    pub fn failures(&self) -> u64 {
        self.failures.load(Ordering::Relaxed)
    }

    /// Likelihood evaluations performed (in-bounds posterior calls).
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Model predictions for every target, in target order.
    pub fn predictions(&self, theta: &[f64]) -> Result<Vec<Result<f64, SimulationError>>, CalibrationError> {
        let mech = apply_parameters(&self.mechanism, &self.map, theta)?;
        Ok(self
            .targets
            .iter()
            .map(|t| {
                self.simulations.fetch_add(1, Ordering::Relaxed);
                simulate_target(&mech, t, &self.integrator)
            })
            .collect())
    }

    /// Gaussian log-likelihood; −∞ if any target simulation fails.
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let preds = match self.predictions(theta) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut sum = 0.0;
        let mut failed = false;
        for (t, z) in self.targets.iter().zip(preds) {
            match z {
                Ok(z) => {
                    let r = (z - t.d) / t.sigma;
                    sum -= 0.5 * r * r;
                }
                Err(e) => {
                    log::warn!("target '{}' failed ({e}) at theta = {theta:?}", t.label);
                    failed = true;
                }
            }
        }
        if failed || !sum.is_finite() {
            self.failures.fetch_add(1, Ordering::Relaxed);
            return f64::NEG_INFINITY;
        }
        sum
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        log_prior(&self.prior, theta)
    }

    /// Prior plus likelihood. No simulation runs when the prior is −∞.
    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        let lp = self.log_prior(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(theta)
    }
}

impl LogDensity for PosteriorProblem {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior(x)
    }
}

/// Synthetic-target generation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    /// σ_k = sigma_rel·|z_k| for targets without an explicit sigma.
    pub sigma_rel: f64,
    /// d_k = z_k + noise_scale·σ_k·N(0,1); zero gives noiseless data.
    pub noise_scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTarget {
    pub entry: TargetEntry,
    pub truth: f64,
}

/// Simulates each case with `mech` and attaches noisy data. The noise for
/// target `k` depends only on `(seed, k)`.
pub fn generate_targets(
    mech: &Mechanism,
    cases: &[TargetEntry],
    cfg: &IntegratorConfig,
    opts: &GenOptions,
) -> Result<Vec<GeneratedTarget>, CalibrationError> {
    cases
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let truth = simulate_case(mech, &t.case, cfg).map_err(|e| CalibrationError::Target {
                label: t.label.clone(),
                reason: format!("baseline simulation failed: {e}"),
            })?;
            let sigma = t.sigma.unwrap_or(opts.sigma_rel * truth.abs());
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(opts.seed, k as u64, u64::MAX));
            let n: f64 = StandardNormal.sample(&mut rng);
            let d = if opts.noise_scale == 0.0 {
                truth
            } else {
                truth + opts.noise_scale * sigma * n
            };
            Ok(GeneratedTarget {
                entry: TargetEntry {
                    d: Some(d),
                    sigma: Some(sigma),
                    ..t.clone()
                },
                truth,
            })
        })
        .collect()
}

/// `label,truth,d,sigma` rows for the generated targets.
pub fn truth_csv(targets: &[GeneratedTarget]) -> String {
    let mut s = String::from("label,truth,d,sigma\n");
    for g in targets {
        s.push_str(&format!(
            "{},{:e},{:e},{:e}\n",
            g.entry.label,
            g.truth,
            g.entry.d.unwrap_or(f64::NAN),
            g.entry.sigma.unwrap_or(f64::NAN)
        ));
    }
    s
}
