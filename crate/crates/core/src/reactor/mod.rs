//! Adiabatic 0D homogeneous reactors and observable extraction.
//!
//! The state vector is `[T, Y_1, ..., Y_n]` (temperature in K, mass
//! fractions). Species equations are `dY_i/dt = ω̇_i W_i / ρ`; the energy
//! equation is written in temperature form for either constant pressure
//! (enthalpy, cp) or constant volume (internal energy, cv).

pub mod bdf;

use serde::{Deserialize, Serialize};

use crate::kinetics::{production_rates_into, GasState, RateWorkspace};
use crate::mechanism::{Mechanism, GAS_CONSTANT_CGS, ONE_ATM};
use bdf::{Bdf, BdfError, BdfStats, OdeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactorMode {
    ConstantPressure,
    ConstantVolume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Quantity {
    Temperature,
    /// atm
    Pressure,
    MoleFraction(String),
    MassFraction(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObservableSpec {
    /// First time T reaches `t_ign` (K).
    IgnitionDelayThreshold { t_ign: f64 },
    /// Time of maximum dT/dt.
    IgnitionDelayMaxDtDt,
    /// First time `Y_species <= fraction * Y_species(0)`.
    FuelFraction { species: String, fraction: f64 },
    StateAtTime { time: f64, quantity: Quantity },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    /// K
    pub temperature: f64,
    /// atm
    pub pressure: f64,
    pub mole_fractions: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactorCase {
    pub mode: ReactorMode,
    pub initial: InitialState,
    /// s
    pub t_end: f64,
    pub observable: ObservableSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    /// Absolute tolerance on mass fractions.
    pub atol: f64,
    /// Absolute tolerance on temperature (K).
    pub atol_temperature: f64,
    pub max_steps: usize,
    pub initial_dt: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-14,
            atol_temperature: 1e-8,
            max_steps: 100_000,
            initial_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("unknown species '{0}' in case")]
    UnknownSpecies(String),
    #[error("{0}")]
    Invalid(String),
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.rtol > 0.0 && self.rtol <= 1e-2) {
            return Err(CaseError::Invalid(format!("rtol {} outside (0, 1e-2]", self.rtol)));
        }
        if !(self.atol > 0.0 && self.atol_temperature > 0.0) {
            return Err(CaseError::Invalid("atol must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(CaseError::Invalid("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

impl ReactorCase {
    pub fn validate(&self, mech: &Mechanism) -> Result<(), CaseError> {
        let init = &self.initial;
        if !(init.temperature > 0.0 && init.pressure > 0.0 && self.t_end > 0.0) {
            return Err(CaseError::Invalid("T0, p0 and t_end must be positive".into()));
        }
        let mut sum = 0.0;
        for (name, x) in &init.mole_fractions {
            if mech.species_index(name).is_none() {
                return Err(CaseError::UnknownSpecies(name.clone()));
            }
            if *x < 0.0 {
                return Err(CaseError::Invalid(format!("negative mole fraction for {name}")));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(CaseError::Invalid(format!("mole fractions sum to {sum}, not 1")));
        }
        match &self.observable {
            ObservableSpec::IgnitionDelayThreshold { t_ign } if !(*t_ign > 0.0) => {
                Err(CaseError::Invalid("ignition threshold must be positive".into()))
            }
            ObservableSpec::FuelFraction { species, fraction } => {
                if mech.species_index(species).is_none() {
                    return Err(CaseError::UnknownSpecies(species.clone()));
                }
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(CaseError::Invalid("fraction must lie in (0, 1)".into()));
                }
                Ok(())
            }
            ObservableSpec::StateAtTime { time, quantity } => {
                if !(*time > 0.0 && *time <= self.t_end) {
                    return Err(CaseError::Invalid("state time must lie in (0, t_end]".into()));
                }
                match quantity {
                    Quantity::MoleFraction(s) | Quantity::MassFraction(s)
                        if mech.species_index(s).is_none() =>
                    {
                        Err(CaseError::UnknownSpecies(s.clone()))
                    }
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Dense mole-fraction vector in mechanism order.
    pub fn mole_fraction_vector(&self, mech: &Mechanism) -> Result<Vec<f64>, CaseError> {
        let mut x = vec![0.0; mech.n_species()];
        for (name, v) in &self.initial.mole_fractions {
            let i = mech
                .species_index(name)
                .ok_or_else(|| CaseError::UnknownSpecies(name.clone()))?;
            x[i] += v;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    MaxSteps,
    StepTooSmall,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("event not reached before t_end")]
    NoEvent,
    #[error("integration failed ({kind:?}) at t = {t:e} s")]
    IntegrationFailed { kind: FailureKind, t: f64 },
    #[error(transparent)]
    Case(#[from] CaseError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Complete,
    /// Stopped early once the requested event was bracketed.
    EventReached,
    Failed(FailureKind),
}

/// Stored integrator steps. Each state is `[T, Y_1..Y_n]`.
#[derive(Debug, Clone)]
pub struct ReactorTrajectory {
    pub mode: ReactorMode,
    pub species: Vec<String>,
    pub molar_masses: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// dyn/cm² for constant pressure, g/cm³ for constant volume.
    pub constraint: f64,
    pub status: TrajectoryStatus,
    pub stats: BdfStats,
}

impl ReactorTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn temperature(&self, i: usize) -> f64 {
        self.states[i][0]
    }

    pub fn success(&self) -> bool {
        !matches!(self.status, TrajectoryStatus::Failed(_))
    }

    fn inv_mean_molar_mass(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.molar_masses).map(|(yi, w)| yi / w).sum()
    }

    /// g/cm³
    pub fn density_of(&self, state: &[f64]) -> f64 {
        match self.mode {
            ReactorMode::ConstantVolume => self.constraint,
            ReactorMode::ConstantPressure => {
                self.constraint / (GAS_CONSTANT_CGS * state[0] * self.inv_mean_molar_mass(&state[1..]))
            }
        }
    }

    /// dyn/cm²
    pub fn pressure_of(&self, state: &[f64]) -> f64 {
        match self.mode {
            ReactorMode::ConstantPressure => self.constraint,
            ReactorMode::ConstantVolume => {
                self.constraint * GAS_CONSTANT_CGS * state[0] * self.inv_mean_molar_mass(&state[1..])
            }
        }
    }

    pub fn mole_fractions_of(&self, state: &[f64]) -> Vec<f64> {
        let inv = self.inv_mean_molar_mass(&state[1..]);
        state[1..]
            .iter()
            .zip(&self.molar_masses)
            .map(|(y, w)| y / w / inv)
            .collect()
    }

    pub fn gas_state(&self, i: usize) -> GasState {
        let s = &self.states[i];
        let rho = self.density_of(s);
        GasState::new(
            s[0],
            s[1..].iter().zip(&self.molar_masses).map(|(y, w)| rho * y / w).collect(),
        )
    }

    fn quantity_of(&self, state: &[f64], q: &Quantity) -> f64 {
        let idx = |name: &str| self.species.iter().position(|s| s == name).unwrap_or(0);
        match q {
            Quantity::Temperature => state[0],
            Quantity::Pressure => self.pressure_of(state) / ONE_ATM,
            Quantity::MassFraction(s) => state[1 + idx(s)],
            Quantity::MoleFraction(s) => self.mole_fractions_of(state)[idx(s)],
        }
    }
}

/// Right-hand side of the reactor ODE.
pub struct ReactorSystem<'m> {
    mech: &'m Mechanism,
    mode: ReactorMode,
    constraint: f64,
    molar_masses: Vec<f64>,
    ws: RateWorkspace,
    conc: Vec<f64>,
}

impl<'m> ReactorSystem<'m> {
    pub fn new(mech: &'m Mechanism, mode: ReactorMode, constraint: f64) -> Self {
        Self {
            mech,
            mode,
            constraint,
            molar_masses: mech.molar_masses(),
            ws: RateWorkspace::new(mech),
            conc: vec![0.0; mech.n_species()],
        }
    }

    /// Last clipping flag reported by the rate evaluation.
    pub fn clipped(&self) -> bool {
        self.ws.eval.clipped
    }
}

impl OdeSystem for ReactorSystem<'_> {
    fn dim(&self) -> usize {
        self.molar_masses.len() + 1
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let temp = y[0];
        if !(temp > 0.0) {
            dy.iter_mut().for_each(|d| *d = f64::NAN);
            return;
        }
        let mf = &y[1..];
        let rho = match self.mode {
            ReactorMode::ConstantVolume => self.constraint,
            ReactorMode::ConstantPressure => {
                let inv_w: f64 = mf.iter().zip(&self.molar_masses).map(|(y, w)| y / w).sum();
                self.constraint / (GAS_CONSTANT_CGS * temp * inv_w)
            }
        };
        for ((c, yi), w) in self.conc.iter_mut().zip(mf).zip(&self.molar_masses) {
            *c = rho * yi / w;
        }
        production_rates_into(self.mech, temp, &self.conc, &mut self.ws);
        let wdot = &self.ws.eval.production;

        let mut heat_capacity = 0.0;
        let mut heat_release = 0.0;
        let shift = match self.mode {
            ReactorMode::ConstantPressure => 0.0,
            ReactorMode::ConstantVolume => 1.0,
        };
        for (i, sp) in self.mech.species.iter().enumerate() {
            let th = sp.thermo.eval(temp);
            let w = self.molar_masses[i];
            heat_capacity += mf[i] * (th.cp_r - shift) * GAS_CONSTANT_CGS / w;
            heat_release += (th.h_rt - shift) * GAS_CONSTANT_CGS * temp * wdot[i];
            dy[i + 1] = wdot[i] * w / rho;
        }
        dy[0] = -heat_release / (rho * heat_capacity);
    }
}

fn initial_vector(mech: &Mechanism, case: &ReactorCase) -> Result<(Vec<f64>, f64), CaseError> {
    let x = case.mole_fraction_vector(mech)?;
    let w = mech.molar_masses();
    let mean_w: f64 = x.iter().zip(&w).map(|(x, w)| x * w).sum();
    let mut y0 = Vec::with_capacity(x.len() + 1);
    y0.push(case.initial.temperature);
    y0.extend(x.iter().zip(&w).map(|(x, w)| x * w / mean_w));
    let p = case.initial.pressure * ONE_ATM;
    let constraint = match case.mode {
        ReactorMode::ConstantPressure => p,
        ReactorMode::ConstantVolume => p * mean_w / (GAS_CONSTANT_CGS * case.initial.temperature),
    };
    Ok((y0, constraint))
}

fn tolerances(cfg: &IntegratorConfig, n: usize) -> Vec<f64> {
    let mut atol = vec![cfg.atol; n + 1];
    atol[0] = cfg.atol_temperature;
    atol
}

/// Whether the stop condition for `spec` holds at `state`.
fn event_reached(spec: &ObservableSpec, state: &[f64], initial: &[f64], species: &[String]) -> bool {
    match spec {
        ObservableSpec::IgnitionDelayThreshold { t_ign } => state[0] >= *t_ign,
        ObservableSpec::FuelFraction { species: s, fraction } => {
            let i = 1 + species.iter().position(|n| n == s).unwrap_or(0);
            state[i] <= fraction * initial[i]
        }
        _ => false,
    }
}

/// Integrates `[t0, t1]` from `y0`, returning the end state.
fn integrate_segment(
    mech: &Mechanism,
    mode: ReactorMode,
    constraint: f64,
    cfg: &IntegratorConfig,
    t0: f64,
    y0: &[f64],
    t1: f64,
) -> Result<Vec<f64>, SimulationError> {
    let mut sys = ReactorSystem::new(mech, mode, constraint);
    let atol = tolerances(cfg, mech.n_species());
    let mut solver = Bdf::new(&mut sys, t0, y0.to_vec(), t1, cfg.rtol, atol, None);
    let mut steps = 0;
    while !solver.finished() {
        if steps >= cfg.max_steps {
            return Err(SimulationError::IntegrationFailed {
                kind: FailureKind::MaxSteps,
                t: solver.t,
            });
        }
        solver.step(&mut sys).map_err(|e| SimulationError::IntegrationFailed {
            kind: bdf_failure(e),
            t: solver.t,
        })?;
        steps += 1;
    }
    Ok(solver.y)
}

fn bdf_failure(e: BdfError) -> FailureKind {
    match e {
        BdfError::StepTooSmall => FailureKind::StepTooSmall,
        BdfError::NonFinite => FailureKind::NonFinite,
    }
}

/// Integrates the case to `t_end`, or until `stop_at` is bracketed.
pub fn integrate_until(
    mech: &Mechanism,
    case: &ReactorCase,
    cfg: &IntegratorConfig,
    stop_at: Option<&ObservableSpec>,
) -> Result<ReactorTrajectory, CaseError> {
    case.validate(mech)?;
    cfg.validate()?;
    let (y0, constraint) = initial_vector(mech, case)?;
    let species: Vec<String> = mech.species.iter().map(|s| s.name.clone()).collect();
    let mut sys = ReactorSystem::new(mech, case.mode, constraint);
    let atol = tolerances(cfg, mech.n_species());
    let mut solver = Bdf::new(&mut sys, 0.0, y0.clone(), case.t_end, cfg.rtol, atol, cfg.initial_dt);

    let mut traj = ReactorTrajectory {
        mode: case.mode,
        species,
        molar_masses: mech.molar_masses(),
        times: vec![0.0],
        states: vec![y0.clone()],
        constraint,
        status: TrajectoryStatus::Complete,
        stats: BdfStats::default(),
    };
    let mut steps = 0;
    while !solver.finished() {
        if steps >= cfg.max_steps {
            traj.status = TrajectoryStatus::Failed(FailureKind::MaxSteps);
            break;
        }
        if let Err(e) = solver.step(&mut sys) {
            traj.status = TrajectoryStatus::Failed(bdf_failure(e));
            break;
        }
        steps += 1;
        if !solver.y.iter().all(|v| v.is_finite()) {
            traj.status = TrajectoryStatus::Failed(FailureKind::NonFinite);
            break;
        }
        traj.times.push(solver.t);
        traj.states.push(solver.y.clone());
        if let Some(spec) = stop_at {
            if event_reached(spec, &solver.y, &y0, &traj.species) {
                traj.status = TrajectoryStatus::EventReached;
                break;
            }
        }
    }
    traj.stats = solver.stats;
    Ok(traj)
}

pub fn integrate(
    mech: &Mechanism,
    case: &ReactorCase,
    cfg: &IntegratorConfig,
) -> Result<ReactorTrajectory, CaseError> {
    integrate_until(mech, case, cfg, None)
}

fn lerp_crossing(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        t1
    } else {
        t0 + (level - v0) * (t1 - t0) / (v1 - v0)
    }
}

/// First index whose state satisfies the event, or `None`.
fn first_event(traj: &ReactorTrajectory, spec: &ObservableSpec) -> Option<usize> {
    let init = &traj.states[0];
    (0..traj.len()).find(|&i| event_reached(spec, &traj.states[i], init, &traj.species))
}

fn event_level(traj: &ReactorTrajectory, spec: &ObservableSpec) -> (usize, f64) {
    match spec {
        ObservableSpec::IgnitionDelayThreshold { t_ign } => (0, *t_ign),
        ObservableSpec::FuelFraction { species, fraction } => {
            let i = 1 + traj.species.iter().position(|n| n == species).unwrap_or(0);
            (i, fraction * traj.states[0][i])
        }
        _ => unreachable!("level events only"),
    }
}

/// Observable from stored points only (linear interpolation, no re-integration).
pub fn extract_observable(
    traj: &ReactorTrajectory,
    spec: &ObservableSpec,
) -> Result<f64, SimulationError> {
    if traj.is_empty() {
        return Err(SimulationError::NoEvent);
    }
    match spec {
        ObservableSpec::IgnitionDelayThreshold { .. } | ObservableSpec::FuelFraction { .. } => {
            let (comp, level) = event_level(traj, spec);
            match first_event(traj, spec) {
                Some(0) => Ok(0.0),
                Some(i) => Ok(lerp_crossing(
                    traj.times[i - 1],
                    traj.states[i - 1][comp],
                    traj.times[i],
                    traj.states[i][comp],
                    level,
                )),
                None => Err(no_event_or_failure(traj)),
            }
        }
        ObservableSpec::IgnitionDelayMaxDtDt => {
            if traj.len() < 2 {
                return Err(SimulationError::NoEvent);
            }
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 1..traj.len() {
                let slope = (traj.states[i][0] - traj.states[i - 1][0])
                    / (traj.times[i] - traj.times[i - 1]);
                if slope > best.0 {
                    best = (slope, 0.5 * (traj.times[i] + traj.times[i - 1]));
                }
            }
            Ok(best.1)
        }
        ObservableSpec::StateAtTime { time, quantity } => {
            let Some(i) = traj.times.iter().position(|&t| t >= *time) else {
                return Err(no_event_or_failure(traj));
            };
            if traj.times[i] == *time || i == 0 {
                return Ok(traj.quantity_of(&traj.states[i], quantity));
            }
            let (t0, t1) = (traj.times[i - 1], traj.times[i]);
            let w = (time - t0) / (t1 - t0);
            let a = traj.quantity_of(&traj.states[i - 1], quantity);
            let b = traj.quantity_of(&traj.states[i], quantity);
            Ok(a + w * (b - a))
        }
    }
}

fn no_event_or_failure(traj: &ReactorTrajectory) -> SimulationError {
    match traj.status {
        TrajectoryStatus::Failed(kind) => SimulationError::IntegrationFailed {
            kind,
            t: *traj.times.last().unwrap_or(&0.0),
        },
        _ => SimulationError::NoEvent,
    }
}

/// Relative width at which crossing-time bisection stops.
const EVENT_REL_TOL: f64 = 1e-7;
const EVENT_MAX_BISECTIONS: usize = 60;

/// Observable with event times refined by bisection re-integration over the
/// bracketing step, and point values re-integrated to the exact time.
pub fn refine_observable(
    mech: &Mechanism,
    traj: &ReactorTrajectory,
    spec: &ObservableSpec,
    cfg: &IntegratorConfig,
) -> Result<f64, SimulationError> {
    match spec {
        ObservableSpec::IgnitionDelayThreshold { .. } | ObservableSpec::FuelFraction { .. } => {
            let i = match first_event(traj, spec) {
                Some(0) => return Ok(0.0),
                Some(i) => i,
                None => return Err(no_event_or_failure(traj)),
            };
            let (comp, level) = event_level(traj, spec);
            let init = traj.states[0].clone();
            let (mut ta, mut ya) = (traj.times[i - 1], traj.states[i - 1].clone());
            let (mut tb, mut yb) = (traj.times[i], traj.states[i].clone());
            for _ in 0..EVENT_MAX_BISECTIONS {
                if tb - ta <= EVENT_REL_TOL * tb {
                    break;
                }
                let tm = 0.5 * (ta + tb);
                let ym = integrate_segment(mech, traj.mode, traj.constraint, cfg, ta, &ya, tm)?;
                if event_reached(spec, &ym, &init, &traj.species) {
                    tb = tm;
                    yb = ym;
                } else {
                    ta = tm;
                    ya = ym;
                }
            }
            Ok(lerp_crossing(ta, ya[comp], tb, yb[comp], level))
        }
        ObservableSpec::IgnitionDelayMaxDtDt => {
            if traj.len() < 2 {
                return Err(no_event_or_failure(traj));
            }
            let mut sys = ReactorSystem::new(mech, traj.mode, traj.constraint);
            let mut dy = vec![0.0; mech.n_species() + 1];
            let mut best = (f64::NEG_INFINITY, 0.0);
            for (t, y) in traj.times.iter().zip(&traj.states) {
                sys.rhs(*t, y, &mut dy);
                if dy[0] > best.0 {
                    best = (dy[0], *t);
                }
            }
            Ok(best.1)
        }
        ObservableSpec::StateAtTime { time, quantity } => {
            let Some(i) = traj.times.iter().position(|&t| t >= *time) else {
                return Err(no_event_or_failure(traj));
            };
            if traj.times[i] == *time {
                return Ok(traj.quantity_of(&traj.states[i], quantity));
            }
            let y = integrate_segment(
                mech,
                traj.mode,
                traj.constraint,
                cfg,
                traj.times[i - 1],
                &traj.states[i - 1],
                *time,
            )?;
            Ok(traj.quantity_of(&y, quantity))
        }
    }
}

/// Integrate and extract the case's observable. Deterministic for fixed inputs.
pub fn simulate_case(
    mech: &Mechanism,
    case: &ReactorCase,
    cfg: &IntegratorConfig,
) -> Result<f64, SimulationError> {
    let stop = match case.observable {
        ObservableSpec::IgnitionDelayThreshold { .. } | ObservableSpec::FuelFraction { .. } => {
            Some(&case.observable)
        }
        ObservableSpec::StateAtTime { time, .. } => {
            let traj = integrate_until(
                mech,
                &ReactorCase {
                    t_end: time,
                    ..case.clone()
                },
                cfg,
                None,
            )?;
            return match traj.status {
                TrajectoryStatus::Failed(kind) => Err(SimulationError::IntegrationFailed {
                    kind,
                    t: *traj.times.last().unwrap_or(&0.0),
                }),
                _ => refine_observable(mech, &traj, &case.observable, cfg),
            };
        }
        ObservableSpec::IgnitionDelayMaxDtDt => None,
    };
    let traj = integrate_until(mech, case, cfg, stop)?;
    if let TrajectoryStatus::Failed(kind) = traj.status {
        // An event bracketed before the failure is still unusable: the
        // trajectory never reached a consistent state past it.
        return Err(SimulationError::IntegrationFailed {
            kind,
            t: *traj.times.last().unwrap_or(&0.0),
        });
    }
    refine_observable(mech, &traj, &case.observable, cfg)
}

/// Element moles per unit mass for each element, along a stored state.
pub fn element_moles(mech: &Mechanism, state: &[f64]) -> Vec<f64> {
    let em = crate::mechanism::element_matrix(mech);
    em.counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&state[1..])
                .zip(&mech.species)
                .map(|((n, y), s)| *n as f64 * y / s.molar_mass)
                .sum()
        })
        .collect()
}

/// Specific enthalpy (constant pressure) or internal energy (constant volume), erg/g.
pub fn specific_energy(mech: &Mechanism, mode: ReactorMode, state: &[f64]) -> f64 {
    let t = state[0];
    let shift = match mode {
        ReactorMode::ConstantPressure => 0.0,
        ReactorMode::ConstantVolume => 1.0,
    };
    mech.species
        .iter()
        .zip(&state[1..])
        .map(|(s, y)| y * (s.thermo.eval(t).h_rt - shift) * GAS_CONSTANT_CGS * t / s.molar_mass)
        .sum()
}
