//! Reactor trajectories against an independent fixed-step integrator, plus
//! conservation, determinism and failure handling.

use kincal::calibration::{apply_parameters, baseline_active, ExperimentTarget, PosteriorProblem};
use kincal::kinetics::{production_rates, GasState};
use kincal::mechanism::{Mechanism, GAS_CONSTANT_CGS, ONE_ATM};
use kincal::reactor::{
    element_moles, integrate, simulate_case, specific_energy, FailureKind, InitialState, IntegratorConfig,
    ObservableSpec, Quantity, ReactorCase, ReactorMode, SimulationError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stoich(mode: ReactorMode, t0: f64, p0: f64, t_end: f64, observable: ObservableSpec) -> ReactorCase {
    ReactorCase {
        mode,
        initial: InitialState {
            temperature: t0,
            pressure: p0,
            mole_fractions: vec![("H2".into(), 0.3), ("O2".into(), 0.15), ("N2".into(), 0.55)],
        },
        t_end,
        observable,
    }
}

fn ignition(mode: ReactorMode, t0: f64, p0: f64, t_end: f64) -> ReactorCase {
    stoich(mode, t0, p0, t_end, ObservableSpec::IgnitionDelayThreshold { t_ign: t0 + 400.0 })
}

/// Closed adiabatic vessel in (T, Y): species from net production, and
/// temperature from the internal-energy balance `ρ c_v dT/dt = −Σ u_k ω_k`.
fn cv_rhs(mech: &Mechanism, rho: f64, y: &[f64], dy: &mut [f64]) {
    let t = y[0];
    let conc: Vec<f64> = mech
        .species
        .iter()
        .zip(&y[1..])
        .map(|(s, yk)| rho * yk / s.molar_mass)
        .collect();
    let omega = production_rates(mech, &GasState::new(t, conc)).production;
    let (mut cv, mut release) = (0.0, 0.0);
    for (k, s) in mech.species.iter().enumerate() {
        let th = s.thermo.eval(t);
        cv += y[1 + k] * (th.cp_r - 1.0) * GAS_CONSTANT_CGS / s.molar_mass;
        release += (th.h_rt - 1.0) * GAS_CONSTANT_CGS * t * omega[k];
        dy[1 + k] = omega[k] * s.molar_mass / rho;
    }
    dy[0] = -release / (rho * cv);
}

/// RK4 at fixed `dt`; returns T on the grid `0, dt, 2dt, ...` up to `t_end`.
fn rk4_temperatures(mech: &Mechanism, case: &ReactorCase, dt: f64) -> Vec<f64> {
    let n = mech.n_species() + 1;
    let x = case.mole_fraction_vector(mech).unwrap();
    let wbar: f64 = x.iter().zip(&mech.species).map(|(x, s)| x * s.molar_mass).sum();
    let t0 = case.initial.temperature;
    let rho = case.initial.pressure * ONE_ATM * wbar / (GAS_CONSTANT_CGS * t0);
    let mut y = vec![t0];
    y.extend(x.iter().zip(&mech.species).map(|(x, s)| x * s.molar_mass / wbar));
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let steps = (case.t_end / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(t0);
    for _ in 0..steps {
        cv_rhs(mech, rho, &y, &mut k[0]);
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                tmp[i] = y[i] + frac * dt * k[stage - 1][i];
            }
            cv_rhs(mech, rho, &tmp, &mut k[stage]);
        }
        for i in 0..n {
            y[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        out.push(y[0]);
    }
    out
}

#[test]
fn constant_volume_temperature_history_matches_rk4() {
    let mech = Mechanism::baseline();
    let case = ignition(ReactorMode::ConstantVolume, 1200.0, 1.0, 1.2e-4);
    let dt = 2e-9;
    let oracle = rk4_temperatures(&mech, &case, dt);
    let cfg = IntegratorConfig::default();
    let traj = integrate(&mech, &case, &cfg).unwrap();
    assert!(traj.success());
    let t_final = traj.temperature(traj.len() - 1);
    assert!(t_final > 2000.0, "mixture should have burned, T = {t_final}");

    let mut worst: f64 = 0.0;
    for (time, state) in traj.times.iter().zip(&traj.states) {
        let f = time / dt;
        let i = (f.floor() as usize).min(oracle.len() - 2);
        let w = f - i as f64;
        let reference = oracle[i] + w * (oracle[i + 1] - oracle[i]);
        worst = worst.max((state[0] - reference).abs() / reference);
    }
    assert!(worst < 5e-3, "worst pointwise temperature error {worst:e}");
}

fn relative_drift(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}

#[test]
fn elements_and_energy_are_conserved_for_random_parameters() {
    let base = Mechanism::baseline();
    let (map, prior) = baseline_active(&base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = IntegratorConfig::default();
    for trial in 0..4 {
        let theta: Vec<f64> = prior
            .entries
            .iter()
            .map(|e| rng.gen_range(e.lower..=e.upper))
            .collect();
        let mech = apply_parameters(&base, &map, &theta).unwrap();
        for mode in [ReactorMode::ConstantPressure, ReactorMode::ConstantVolume] {
            let case = ignition(mode, 1100.0 + 100.0 * trial as f64, 2.0, 5e-4);
            let traj = integrate(&mech, &case, &cfg).unwrap();
            assert!(traj.success(), "trial {trial} {mode:?}: {:?}", traj.status);
            let first = &traj.states[0];
            let last = &traj.states[traj.len() - 1];
            let drift = relative_drift(&element_moles(&mech, first), &element_moles(&mech, last));
            assert!(drift < 1e-10, "trial {trial} {mode:?}: element drift {drift:e}");
            // Energy drift relative to the sensible-energy scale of the mixture.
            let scale = GAS_CONSTANT_CGS * first[0] * first[1..]
                .iter()
                .zip(&mech.species)
                .map(|(y, s)| y / s.molar_mass)
                .sum::<f64>();
            let e0 = specific_energy(&mech, mode, first);
            let e1 = specific_energy(&mech, mode, last);
            assert!((e1 - e0).abs() / scale < 1e-6, "trial {trial} {mode:?}: energy drift {}", (e1 - e0) / scale);
            let ysum: f64 = last[1..].iter().sum();
            assert!((ysum - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn simulation_is_deterministic_across_thread_pools() {
    let mech = Mechanism::baseline();
    let case = ignition(ReactorMode::ConstantPressure, 1100.0, 1.0, 0.01);
    let cfg = IntegratorConfig::default();
    let direct = simulate_case(&mech, &case, &cfg).unwrap();
    let pooled: Vec<f64> = {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        pool.install(|| (0..3).into_par_iter().map(|_| simulate_case(&mech, &case, &cfg).unwrap()).collect())
    };
    assert!(pooled.iter().all(|&v| v.to_bits() == direct.to_bits()));
}

#[test]
fn moving_r16_to_its_lower_bound_shifts_ignition() {
    let base = Mechanism::baseline();
    let (map, prior) = baseline_active(&base).unwrap();
    let k = map.names().iter().position(|n| n == "R16.A").unwrap();
    let mut theta = prior.means();
    theta[k] = prior.entries[k].lower;
    let moved = apply_parameters(&base, &map, &theta).unwrap();
    assert_eq!(moved.reaction("R16").unwrap().rate.primary().a, prior.entries[k].lower);

    let cfg = IntegratorConfig::default();
    let case = ignition(ReactorMode::ConstantPressure, 1000.0, 10.0, 0.5);
    let tau0 = simulate_case(&base, &case, &cfg).unwrap();
    let tau1 = simulate_case(&moved, &case, &cfg).unwrap();
    assert!((tau1 / tau0 - 1.0).abs() > 1e-3, "tau {tau0:e} -> {tau1:e}");
}

#[test]
fn state_at_time_reproduces_the_trajectory() {
    let mech = Mechanism::baseline();
    let cfg = IntegratorConfig::default();
    let probe = |time: f64, quantity: Quantity| {
        let case = stoich(
            ReactorMode::ConstantVolume,
            1300.0,
            1.0,
            1e-4,
            ObservableSpec::StateAtTime { time, quantity },
        );
        simulate_case(&mech, &case, &cfg).unwrap()
    };
    // A picosecond in, nothing has happened yet.
    assert!((probe(1e-12, Quantity::Temperature) - 1300.0).abs() < 1e-6);
    assert!((probe(1e-12, Quantity::Pressure) - 1.0).abs() < 1e-9);
    assert!((probe(1e-12, Quantity::MoleFraction("O2".into())) - 0.15).abs() < 1e-9);
    // Pressure rises with temperature in a closed vessel.
    let (t, p) = (probe(8e-5, Quantity::Temperature), probe(8e-5, Quantity::Pressure));
    assert!(t > 1300.0 && p > 1.0, "T {t}, p {p}");
}

#[test]
fn failures_are_reported_not_hidden() {
    let mech = Mechanism::baseline();
    let starved = IntegratorConfig {
        max_steps: 5,
        ..IntegratorConfig::default()
    };
    let case = ignition(ReactorMode::ConstantPressure, 1100.0, 1.0, 0.01);
    match simulate_case(&mech, &case, &starved) {
        Err(SimulationError::IntegrationFailed { kind, .. }) => assert_eq!(kind, FailureKind::MaxSteps),
        other => panic!("expected a step-limit failure, got {other:?}"),
    }
    let short = ignition(ReactorMode::ConstantPressure, 1100.0, 1.0, 1e-7);
    assert_eq!(simulate_case(&mech, &short, &IntegratorConfig::default()), Err(SimulationError::NoEvent));

    // A failed target makes the likelihood −∞ and is counted.
    let (map, prior) = baseline_active(&mech).unwrap();
    let target = ExperimentTarget {
        label: "never".into(),
        case: short,
        d: 1e-4,
        sigma: 1e-5,
    };
    let problem = PosteriorProblem::new(mech, map, prior, vec![target], IntegratorConfig::default()).unwrap();
    let theta = problem.prior.means();
    // The bundled prior has one mean outside its bounds; pull it inside.
    let theta: Vec<f64> = theta
        .iter()
        .zip(&problem.prior.entries)
        .map(|(&m, e)| m.clamp(e.lower, e.upper))
        .collect();
    assert_eq!(problem.log_posterior(&theta), f64::NEG_INFINITY);
    assert_eq!(problem.failures(), 1);
    assert_eq!(problem.evaluations(), 1);
}
